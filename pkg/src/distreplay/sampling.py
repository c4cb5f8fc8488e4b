"""Per-transition sampling probabilities and batch draws.

Three strategies are supported:

``uniform``
    every stored transition has probability ``1/n``.
``equal_cluster``
    every nonempty cluster is equally likely, uniform within the cluster,
    so ``p_i = 1 / (k * num_i)``.
``distribution_aware``
    the mixture ``p_i = beta/n + (1 - beta) / (k * num_i)``.

``k`` is always the number of *nonempty* clusters; counting empty hash
buckets would leave the probabilities summing to less than one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from statistics import NormalDist

import numba
import numpy as np

from .clustering import ClusterIndex
from .errors import ConfigError, IndexCorruptionError, NotReadyError


class Strategy(str, enum.Enum):
    UNIFORM = "uniform"
    EQUAL_CLUSTER = "equal_cluster"
    DISTRIBUTION_AWARE = "distribution_aware"


@dataclass(frozen=True)
class SamplerConfig:
    strategy: Strategy = Strategy.DISTRIBUTION_AWARE
    beta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not 0.0 <= self.beta <= 1.0 or math.isnan(self.beta):
            raise ConfigError(f"beta must lie in [0, 1], got {self.beta}")

    @property
    def effective_beta(self) -> float:
        """Weight on the uniform component of the mixture."""
        if self.strategy is Strategy.UNIFORM:
            return 1.0
        if self.strategy is Strategy.EQUAL_CLUSTER:
            return 0.0
        return self.beta


def probability(config: SamplerConfig, n: int, num_i: int, k: int) -> float:
    """Sampling probability of one transition from the counts alone."""
    if num_i < 1:
        raise IndexCorruptionError(f"cluster count must be positive, got {num_i}")
    if n < 1 or k < 1:
        raise NotReadyError("probabilities are undefined for an empty buffer")
    if config.strategy is Strategy.UNIFORM:
        return 1.0 / n
    if config.strategy is Strategy.EQUAL_CLUSTER:
        return 1.0 / (k * num_i)
    beta = config.beta
    return beta / n + (1.0 - beta) / (k * num_i)


def probability_of(slot: int, config: SamplerConfig, buffer_len: int, index: ClusterIndex) -> float:
    code = index.cluster_of(slot)
    return probability(config, buffer_len, index.count(code), index.k)


def probabilities(config: SamplerConfig, buffer_len: int, index: ClusterIndex) -> np.ndarray:
    """Probability of every slot ``0 .. buffer_len-1`` as an array."""
    if buffer_len < 1:
        raise NotReadyError("buffer is empty")
    if len(index) != buffer_len:
        raise IndexCorruptionError(f"index holds {len(index)} slots, buffer holds {buffer_len}")
    p = np.full(buffer_len, np.nan)
    k = index.k
    rows, counts, members = index.sampling_arrays()
    for row in rows.tolist():
        c = int(counts[row])
        p[members[row, :c]] = probability(config, buffer_len, c, k)
    if np.isnan(p).any():
        raise IndexCorruptionError("some stored slots are missing from the index")
    return p


def sample_batch(
    batch_size: int,
    config: SamplerConfig,
    buffer_len: int,
    index: ClusterIndex,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``batch_size`` slots i.i.d. (with replacement) from the mixture.

    Each draw takes the uniform route with probability ``effective_beta``,
    otherwise it picks a nonempty cluster uniformly and then a uniform member
    of it.  Exactly ``3 * batch_size`` uniforms are consumed from ``rng``
    regardless of strategy, so strategies that coincide produce identical
    draws from identical streams.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be at least 1, got {batch_size}")
    if buffer_len < 1 or index.k == 0:
        raise NotReadyError("cannot sample from an empty buffer")

    u = rng.random((3, batch_size))
    rows, counts, members = index.sampling_arrays()
    out = np.empty(batch_size, dtype=np.int64)
    draw_slots(u, config.effective_beta, buffer_len, rows, counts, members, out)
    return out


@numba.njit(cache=True)
def draw_slots(u, beta, n, rows, counts, members, out):
    """Map uniforms ``u`` (shape ``(3, B)``) to slots; see :func:`sample_batch`.

    Row 0 picks the route, row 1 the slot (uniform route) or the cluster,
    row 2 the member within the cluster.
    """
    k = rows.shape[0]
    for j in range(out.shape[0]):
        if u[0, j] < beta:
            out[j] = min(int(u[1, j] * n), n - 1)
        else:
            row = rows[min(int(u[1, j] * k), k - 1)]
            c = counts[row]
            out[j] = members[row, min(int(u[2, j] * c), c - 1)]


@dataclass
class AuditReport:
    slots: np.ndarray
    analytic: np.ndarray
    empirical: np.ndarray
    draws: int
    z: float

    @property
    def deviation(self) -> np.ndarray:
        return self.empirical - self.analytic

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.analytic * (1.0 - self.analytic) / self.draws)

    @property
    def max_deviation(self) -> float:
        return float(np.abs(self.deviation).max())

    @property
    def max_z(self) -> float:
        se = self.standard_error
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(se > 0, np.abs(self.deviation) / se, np.where(self.deviation == 0, 0.0, np.inf))
        return float(ratio.max())

    @property
    def passed(self) -> bool:
        return self.max_z <= self.z

    def rows(self):
        for row in zip(self.slots, self.analytic, self.empirical, self.deviation):
            yield int(row[0]), float(row[1]), float(row[2]), float(row[3])


def bonferroni_z(n_slots: int, alpha: float = 0.01) -> float:
    """Two-sided normal quantile controlling family-wise error over ``n_slots``."""
    return NormalDist().inv_cdf(1.0 - alpha / (2.0 * max(n_slots, 1)))


def audit_distribution(
    draws: int,
    config: SamplerConfig,
    buffer_len: int,
    index: ClusterIndex,
    rng: np.random.Generator,
    z: float | None = None,
    chunk: int = 1 << 18,
) -> AuditReport:
    """Compare empirical slot frequencies from :func:`sample_batch` to the analytic ones.

    The index is checked for internal consistency first.  ``z`` defaults to a
    Bonferroni-corrected bound over all slots at family-wise level 0.01.
    """
    index.check_consistency(buffer_len)
    analytic = probabilities(config, buffer_len, index)
    hits = np.zeros(buffer_len, dtype=np.int64)
    remaining = draws
    while remaining > 0:
        size = min(chunk, remaining)
        hits += np.bincount(sample_batch(size, config, buffer_len, index, rng), minlength=buffer_len)
        remaining -= size
    return AuditReport(
        slots=np.arange(buffer_len),
        analytic=analytic,
        empirical=hits / draws,
        draws=draws,
        z=bonferroni_z(buffer_len) if z is None else z,
    )
