"""SimHash buckets states by direction, so nearby angles share codes.

Each bit records which side of a random hyperplane a (rescaled) state lies
on.  Two vectors agree on a bit with probability 1 - angle / pi, so the
number of agreeing bits tracks the angle between them, and the code
ignores vector length entirely.

    python3 demos/02_simhash_clusters.py
"""
import math

import numpy as np

from distreplay.clustering import make_simhash, simhash_bits, simhash_codes

params = make_simhash(64, 2, seed=0)
base = np.array([1.0, 0.0])
print(f"{'angle':>7} {'bit agreement':>14} {'1 - angle/pi':>13}")
for degrees in (0, 15, 45, 90, 135, 180):
    a = math.radians(degrees)
    other = np.array([math.cos(a), math.sin(a)])
    agree = np.mean(simhash_bits(params, base) == simhash_bits(params, other))
    print(f"{degrees:6d}° {agree:14.3f} {1 - a / math.pi:13.3f}")

# Averaged over many pairs the agreement converges on the law.
rng = np.random.default_rng(1)
x = rng.normal(size=(5000, 8))
y = x + 0.6 * rng.normal(size=(5000, 8))
cos = (x * y).sum(1) / np.linalg.norm(x, axis=1) / np.linalg.norm(y, axis=1)
params8 = make_simhash(64, 8, seed=2)
agree = (simhash_bits(params8, x) == simhash_bits(params8, y)).mean()
print(f"\n5000 random pairs in 8-d: mean agreement {agree:.4f}, law predicts {np.mean(1 - np.arccos(cos) / math.pi):.4f}")

codes = simhash_codes(params, x[:, :2])
print(f"scaling by 1000 changes no code: {np.array_equal(codes, simhash_codes(params, 1000 * x[:, :2]))}")
