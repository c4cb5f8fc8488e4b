"""``distreplay`` command line.

Exit codes: 0 success, 1 runtime fault or failed audit, 2 bad configuration
or input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..errors import AlignmentError, ConfigError, RejectedInputError, ReplayError
from .config import PRESETS, ExperimentConfig, build_config, load_config

EXIT_OK, EXIT_FAULT, EXIT_CONFIG = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--env", help="gridworld, chain or mountain_car")
    p.add_argument("--map", help="gridworld map file")
    p.add_argument("--strategy", dest="strategies", help="comma-separated strategies")
    p.add_argument("--beta", dest="betas", help="comma-separated beta values")
    p.add_argument("--seeds", help="e.g. 0-9 or 0,3,4")
    p.add_argument("--master-seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--buffer-size", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--clusterer", choices=("kmeans", "simhash"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="parallel runs (processes)")


_CONFIG_KEYS = ("preset", "env", "map", "strategies", "betas", "seeds", "master_seed", "episodes",
                "buffer_size", "clusters", "clusterer", "out", "workers")


def _config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if getattr(args, "draws", None) is not None:
        overrides["audit_draws"] = args.draws
    if getattr(args, "transitions", None) is not None:
        overrides["audit_transitions"] = args.transitions
    if getattr(args, "steps", None) is not None:
        overrides["report_steps"] = args.steps
    if args.config:
        return load_config(args.config, overrides)
    return build_config({}, overrides)


def cmd_run(args, out) -> int:
    from .experiment import run_experiment

    cfg = _config(args)
    path = run_experiment(cfg, log=lambda msg: print(msg, file=out))
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_compare(args, out) -> int:
    from .reports import compare, format_summary, load_metrics, write_summary

    rows = compare(load_metrics(args.metrics))
    print(format_summary(rows), file=out)
    dest = Path(args.out or ".")
    dest.mkdir(parents=True, exist_ok=True)
    write_summary(rows, dest / "summary.csv")
    print(f"wrote {dest / 'summary.csv'}", file=out)
    return EXIT_OK


def cmd_audit(args, out) -> int:
    from .reports import run_audit, write_audit

    cfg = _config(args)
    results = run_audit(cfg, fault=args.inject_fault)
    status = EXIT_OK
    for sampler, report in results:
        verdict = "pass" if report.passed else "FAIL"
        print(
            f"{sampler.strategy.value:<20} beta={sampler.effective_beta:<4g} "
            f"max|dev|={report.max_deviation:.3e} max z={report.max_z:.2f} bound={report.z:.2f} {verdict}",
            file=out,
        )
        if not report.passed:
            status = EXIT_FAULT
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    write_audit(results, dest / "audit.csv")
    return status


def cmd_cluster_report(args, out) -> int:
    from .experiment import collect_random
    from .reports import cluster_report, top_share, write_cluster_report

    cfg = _config(args)
    buffer, index = collect_random(cfg, cfg.report_steps, cfg.buffer_size, cfg.master_seed)
    index.check_consistency(len(buffer))
    rows = cluster_report(index)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    write_cluster_report(rows, dest / "cluster_report.csv")
    print(
        f"{len(rows)} nonempty clusters, {len(buffer)} transitions; "
        f"top 20% of clusters hold {top_share(rows):.1%}",
        file=out,
    )
    return EXIT_OK


def cmd_plot(args, out) -> int:
    from .reports import load_metrics
    from .svgplot import write_svg

    runs = load_metrics(args.metrics)
    dest = Path(args.output)
    dest.parent.mkdir(parents=True, exist_ok=True)
    write_svg(runs, dest, title=args.title)
    print(f"wrote {dest}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distreplay", description="Replay-sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train every (strategy, beta, seed) and write metrics CSVs")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="summarise metrics CSVs per strategy")
    p.add_argument("metrics", nargs="+", help="metrics CSV files")
    p.add_argument("--out", help="directory for summary.csv (default: current)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("audit", help="check sampler frequencies against the analytic probabilities")
    _add_config_flags(p)
    p.add_argument("--draws", type=int)
    p.add_argument("--transitions", type=int)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("cluster-report", help="cluster histogram of a random-policy buffer")
    _add_config_flags(p)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_cluster_report)

    p = sub.add_parser("plot", help="SVG of mean_reward_100 curves")
    p.add_argument("metrics", nargs="+", help="metrics CSV files")
    p.add_argument("-o", "--output", default="rewards.svg")
    p.add_argument("--title", default="mean_reward_100 by episode")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ConfigError, RejectedInputError, AlignmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReplayError, FloatingPointError, OSError) as exc:
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
