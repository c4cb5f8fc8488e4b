"""How beta moves probability mass between a crowded cluster and a sparse one.

Ten transitions sit in the buffer: eight in cluster A, two in cluster B.
Uniform replay gives every transition 1/10, so A receives 80% of the draws.
Equal-cluster replay gives each cluster half, so each B transition is drawn
four times as often as an A transition.  Distribution-aware replay blends
the two with beta, and the two-stage sampler reproduces the blend exactly.

    python3 demos/01_sampling_probabilities.py
"""
import numpy as np

from distreplay.clustering import ClusterIndex
from distreplay.sampling import SamplerConfig, Strategy, probability_of, sample_batch

index = ClusterIndex()
for slot in range(10):
    index.insert(slot, 0 if slot < 8 else 1)

rng = np.random.default_rng(0)
draws = 200_000
print(f"{'beta':>5} {'p(A slot)':>10} {'p(B slot)':>10} {'mass on B':>10} {'empirical B':>12}")
for beta in (0.0, 0.25, 0.5, 0.75, 1.0):
    cfg = SamplerConfig(Strategy.DISTRIBUTION_AWARE, beta)
    pa, pb = probability_of(0, cfg, 10, index), probability_of(9, cfg, 10, index)
    slots = sample_batch(draws, cfg, 10, index, rng)
    print(f"{beta:5.2f} {pa:10.5f} {pb:10.5f} {2 * pb:10.3f} {np.mean(slots >= 8):12.3f}")

print("\nbeta = 1 is uniform replay; beta = 0 is equal-cluster replay.")
