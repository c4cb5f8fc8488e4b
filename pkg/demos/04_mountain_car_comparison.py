"""Uniform versus distribution-aware replay on MountainCar.

Runs both samplers over paired seeds and prints the comparison table:
final 100-episode mean reward, area under the learning curve and the number
of seeds on which distribution-aware replay beats uniform on that area.
The default is a quick three-seed, 300-episode run; pass --full for ten
seeds and 1500 episodes (about six minutes on one core).

    python3 demos/04_mountain_car_comparison.py [--full] [--out DIR]
"""
import argparse

from distreplay.harness.config import build_config
from distreplay.harness.experiment import run_experiment
from distreplay.harness.reports import compare, format_summary, load_metrics
from distreplay.harness.svgplot import write_svg

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true")
parser.add_argument("--out", default="results/mountain_car_demo")
args = parser.parse_args()

cfg = build_config({}, {
    "env": "mountain_car", "preset": "classic-small",
    "episodes": "1500" if args.full else "300", "seeds": "0-9" if args.full else "0-2",
    "strategies": "uniform, distribution_aware", "betas": "0.5", "out": args.out,
})
merged = run_experiment(cfg)
runs = load_metrics([merged])
print()
print(format_summary(compare(runs)))
write_svg(runs, f"{args.out}/curves.svg")
print(f"\nlearning curves: {args.out}/curves.svg")
