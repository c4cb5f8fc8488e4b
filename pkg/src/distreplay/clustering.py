"""Clustering of stored states and exact per-cluster membership counts.

Two ways of turning a state into a cluster code are provided:

* SimHash: the sign pattern of ``b`` fixed Gaussian projections, packed into
  an integer.  At most ``2**b`` codes exist, so ``b = ceil(log2(k_target))``.
* k-means: Lloyd's algorithm with k-means++ seeding, fitted once on a warmup
  sample and then used assign-only.

:class:`ClusterIndex` keeps ``code -> member slots`` and the counts ``h(c)``
with O(1) insert and remove.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, IndexCorruptionError, NotReadyError, RejectedInputError

# Code used for transitions stored before a warmup-fitted clusterer is ready.
PROVISIONAL = -1

FEATURE_DIM = 64


def code_bits_for(k_target: int) -> int:
    if k_target < 1:
        raise ConfigError(f"cluster budget must be positive, got {k_target}")
    return max(1, math.ceil(math.log2(k_target)))


# --------------------------------------------------------------------------
# SimHash


@dataclass(frozen=True)
class SimHashParams:
    code_bits: int
    projection: np.ndarray  # (code_bits, dim)
    seed: int

    @property
    def dim(self) -> int:
        return self.projection.shape[1]


def make_simhash(code_bits: int, dim: int, seed: int) -> SimHashParams:
    if not 1 <= code_bits <= 64:
        raise ConfigError(f"code_bits must be in [1, 64], got {code_bits}")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((code_bits, dim))
    projection.setflags(write=False)
    return SimHashParams(code_bits, projection, seed)


def simhash_bits(params: SimHashParams, x) -> np.ndarray:
    """Bit vector of ``x``: bit i is set iff ``projection[i] . x >= 0``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.dim:
        raise RejectedInputError(f"expected dimension {params.dim}, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise RejectedInputError("SimHash input contains non-finite values")
    return x @ params.projection.T >= 0.0


def simhash_code(params: SimHashParams, x) -> int:
    bits = simhash_bits(params, x)
    code = 0
    for i in np.flatnonzero(bits):
        code |= 1 << int(i)
    return code


def simhash_codes(params: SimHashParams, xs) -> np.ndarray:
    """Vectorised :func:`simhash_code` over the rows of ``xs`` (uint64)."""
    bits = simhash_bits(params, np.atleast_2d(xs)).astype(np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(params.code_bits, dtype=np.uint64))
    return (bits * weights).sum(axis=1, dtype=np.uint64)


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansModel:
    k: int
    centroids: Optional[np.ndarray] = None
    fitted: bool = False
    n_iter: int = 0


def _sq_dists(xs: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # Explicit differences rather than the |x|^2 - 2x.c + |c|^2 expansion so
    # that exact ties stay exact.
    out = np.empty((xs.shape[0], centroids.shape[0]))
    for start in range(0, xs.shape[0], 4096):
        chunk = xs[start : start + 4096]
        diff = chunk[:, None, :] - centroids[None, :, :]
        out[start : start + 4096] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _kmeanspp(xs: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = xs.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((xs - xs[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, ((xs - xs[idx]) ** 2).sum(axis=1))
    return xs[chosen].copy()


def kmeans_fit(samples, k: int, seed: int, max_iter: int = 300) -> KMeansModel:
    """Fit ``k`` centroids with k-means++ seeding followed by Lloyd iterations.

    Iteration stops when assignments stop changing or after ``max_iter``
    rounds.  A cluster that goes empty is re-seeded at the point currently
    farthest from its centroid.
    """
    xs = np.asarray(samples, dtype=np.float64)
    if xs.ndim != 2:
        raise RejectedInputError(f"samples must be a 2-d array, got shape {xs.shape}")
    if k < 1 or xs.shape[0] < k:
        raise ConfigError(f"need at least k={k} samples, got {xs.shape[0]}")
    if not np.all(np.isfinite(xs)):
        raise RejectedInputError("k-means samples contain non-finite values")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp(xs, k, rng)
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(xs, centroids)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sizes = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, xs)
        nonempty = sizes > 0
        centroids[nonempty] = sums[nonempty] / sizes[nonempty, None]
        if not nonempty.all():
            nearest = d2[np.arange(len(xs)), labels]
            for j in np.flatnonzero(~nonempty):
                far = int(nearest.argmax())
                centroids[j] = xs[far]
                nearest[far] = -1.0
    return KMeansModel(k=k, centroids=centroids, fitted=True, n_iter=it)


def kmeans_assign(model: KMeansModel, x) -> int:
    """Index of the nearest centroid; ties go to the lowest index."""
    if not model.fitted:
        raise NotReadyError("k-means model has not been fitted")
    diff = model.centroids - np.asarray(x, dtype=np.float64)
    return int(np.einsum("ij,ij->i", diff, diff).argmin())


def kmeans_assign_many(model: KMeansModel, xs) -> np.ndarray:
    if not model.fitted:
        raise NotReadyError("k-means model has not been fitted")
    return _sq_dists(np.atleast_2d(np.asarray(xs, dtype=np.float64)), model.centroids).argmin(axis=1)


def distortion(model: KMeansModel, xs) -> float:
    d2 = _sq_dists(np.asarray(xs, dtype=np.float64), model.centroids)
    return float(d2.min(axis=1).sum())


# --------------------------------------------------------------------------
# Features and clusterers


class Featurizer:
    """Maps raw observations to clustering features.

    Observations are rescaled to ``[-1, 1]`` per dimension when bounds are
    known.  Inputs wider than ``FEATURE_DIM`` are pushed through a fixed
    seeded Gaussian projection down to ``FEATURE_DIM`` columns.
    """

    def __init__(self, dim: int, low=None, high=None, seed: int = 0):
        self.in_dim = dim
        if low is not None and high is not None:
            low = np.asarray(low, dtype=np.float64)
            high = np.asarray(high, dtype=np.float64)
            span = np.where(high > low, high - low, 1.0)
            self._center = (high + low) / 2.0
            self._scale = 2.0 / span
        else:
            self._center = np.zeros(dim)
            self._scale = np.ones(dim)
        if dim > FEATURE_DIM:
            rng = np.random.default_rng(seed)
            self._proj = rng.standard_normal((dim, FEATURE_DIM)) / math.sqrt(FEATURE_DIM)
        else:
            self._proj = None

    @property
    def out_dim(self) -> int:
        return self.in_dim if self._proj is None else FEATURE_DIM

    def __call__(self, xs) -> np.ndarray:
        z = (np.asarray(xs, dtype=np.float64) - self._center) * self._scale
        return z if self._proj is None else z @ self._proj


class SimHashClusterer:
    """Stateless clusterer: code = SimHash of the featurised state."""

    name = "simhash"

    def __init__(self, featurizer: Featurizer, k_target: int = 128, seed: int = 0, code_bits: Optional[int] = None):
        self.featurizer = featurizer
        bits = code_bits_for(k_target) if code_bits is None else code_bits
        self.params = make_simhash(bits, featurizer.out_dim, seed)

    @property
    def ready(self) -> bool:
        return True

    def code(self, state) -> int:
        return simhash_code(self.params, self.featurizer(state))

    def codes(self, states) -> np.ndarray:
        return simhash_codes(self.params, self.featurizer(states)).astype(np.int64)

    def wants_fit(self, total_inserts: int) -> bool:
        return False

    def fit(self, states) -> None:
        pass


class KMeansClusterer:
    """k-means over featurised states, fitted on the first ``warmup_size`` inserts.

    Until the model is fitted every state maps to :data:`PROVISIONAL`.  With
    ``refit_interval > 0`` the model is refitted on the current buffer every
    ``refit_interval`` inserts after the first fit.
    """

    name = "kmeans"

    def __init__(
        self,
        featurizer: Featurizer,
        k: int = 64,
        warmup_size: int = 2000,
        refit_interval: int = 0,
        seed: int = 0,
    ):
        if warmup_size < k:
            raise ConfigError(f"warmup_size ({warmup_size}) must be at least k ({k})")
        self.featurizer = featurizer
        self.k = k
        self.warmup_size = warmup_size
        self.refit_interval = refit_interval
        self.seed = seed
        self.model = KMeansModel(k)
        self._n_fits = 0

    @property
    def ready(self) -> bool:
        return self.model.fitted

    def code(self, state) -> int:
        if not self.model.fitted:
            return PROVISIONAL
        diff = self.model.centroids - self.featurizer(state)
        return int(np.einsum("ij,ij->i", diff, diff).argmin())

    def codes(self, states) -> np.ndarray:
        if not self.model.fitted:
            return np.full(len(states), PROVISIONAL, dtype=np.int64)
        return kmeans_assign_many(self.model, self.featurizer(states)).astype(np.int64)

    def wants_fit(self, total_inserts: int) -> bool:
        if not self.model.fitted:
            return total_inserts >= self.warmup_size
        return (
            self.refit_interval > 0
            and total_inserts > self.warmup_size
            and (total_inserts - self.warmup_size) % self.refit_interval == 0
        )

    def fit(self, states) -> None:
        self.model = kmeans_fit(self.featurizer(states), self.k, seed=self.seed + self._n_fits)
        self._n_fits += 1


# --------------------------------------------------------------------------
# Index


class ClusterIndex:
    """Cluster code -> member slots, with counts and the set of nonempty codes.

    Each cluster present in the index owns a row of a dense member matrix, so
    a batch of ``(cluster, position)`` picks is a single fancy-index.  Memory
    is O(rows x largest cluster); rows are recycled when clusters empty.
    """

    def __init__(self):
        self._row_of: dict[int, int] = {}
        self._code_of_row: list[int] = []
        self._free_rows: list[int] = []
        self._members = np.zeros((8, 16), dtype=np.int64)
        self._counts = np.zeros(8, dtype=np.int64)
        self._slot_code: dict[int, int] = {}
        self._slot_pos: dict[int, int] = {}
        # Rows of nonempty clusters occupy _nonempty[:k]; _nonempty_pos inverts it.
        self._nonempty = np.zeros(8, dtype=np.int64)
        self._nonempty_pos = np.zeros(8, dtype=np.int64)
        self._k = 0

    def __len__(self) -> int:
        return len(self._slot_code)

    @property
    def k(self) -> int:
        """Number of nonempty clusters."""
        return self._k

    def _new_row(self, code: int) -> int:
        if self._free_rows:
            row = self._free_rows.pop()
            self._code_of_row[row] = code
        else:
            row = len(self._code_of_row)
            self._code_of_row.append(code)
            if row == self._members.shape[0]:
                grow = self._members.shape[0]
                self._members = np.vstack([self._members, np.zeros_like(self._members)])
                self._counts = np.concatenate([self._counts, np.zeros(grow, dtype=np.int64)])
                self._nonempty = np.concatenate([self._nonempty, np.zeros(grow, dtype=np.int64)])
                self._nonempty_pos = np.concatenate([self._nonempty_pos, np.zeros(grow, dtype=np.int64)])
        self._row_of[code] = row
        self._nonempty[self._k] = row
        self._nonempty_pos[row] = self._k
        self._k += 1
        return row

    def insert(self, slot: int, code: int) -> None:
        if slot in self._slot_code:
            raise IndexCorruptionError(f"slot {slot} is already indexed")
        row = self._row_of.get(code)
        if row is None:
            row = self._new_row(code)
        pos = int(self._counts[row])
        if pos == self._members.shape[1]:
            self._members = np.hstack([self._members, np.zeros_like(self._members)])
        self._members[row, pos] = slot
        self._counts[row] = pos + 1
        self._slot_code[slot] = code
        self._slot_pos[slot] = pos

    def remove(self, slot: int, code: int) -> None:
        if self._slot_code.get(slot) != code:
            raise IndexCorruptionError(f"slot {slot} is not indexed under code {code}")
        row = self._row_of[code]
        pos = self._slot_pos.pop(slot)
        del self._slot_code[slot]
        last = int(self._counts[row]) - 1
        if pos != last:
            moved = int(self._members[row, last])
            self._members[row, pos] = moved
            self._slot_pos[moved] = pos
        self._counts[row] = last
        if last == 0:
            del self._row_of[code]
            self._free_rows.append(row)
            i = int(self._nonempty_pos[row])
            self._k -= 1
            tail = int(self._nonempty[self._k])
            self._nonempty[i] = tail
            self._nonempty_pos[tail] = i

    def cluster_of(self, slot: int) -> int:
        try:
            return self._slot_code[slot]
        except KeyError:
            raise IndexCorruptionError(f"slot {slot} is not indexed") from None

    def count(self, code: int) -> int:
        row = self._row_of.get(code)
        return 0 if row is None else int(self._counts[row])

    def members(self, code: int) -> list[int]:
        row = self._row_of.get(code)
        return [] if row is None else self._members[row, : self._counts[row]].tolist()

    def nonempty_codes(self) -> list[int]:
        return [self._code_of_row[r] for r in self._nonempty[: self._k].tolist()]

    def nonempty_clusters(self) -> list[tuple[int, int]]:
        return [
            (self._code_of_row[r], int(self._counts[r])) for r in self._nonempty[: self._k].tolist()
        ]

    def sampling_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(rows, counts, members)`` views for vectorised sampling.

        ``rows`` lists the member-matrix rows of the nonempty clusters in
        :meth:`nonempty_codes` order.  The views are invalidated by the next
        mutation and must not be written to.
        """
        return self._nonempty[: self._k], self._counts, self._members

    def clear(self) -> None:
        self.__init__()

    def check_consistency(self, buffer_len: Optional[int] = None) -> None:
        """Raise :class:`IndexCorruptionError` if any invariant is broken."""
        seen = 0
        rows = self._nonempty[: self._k].tolist()
        if sorted(rows) != sorted(self._row_of.values()):
            raise IndexCorruptionError("nonempty-cluster set disagrees with memberships")
        for code, row in self._row_of.items():
            count = int(self._counts[row])
            if count == 0:
                raise IndexCorruptionError(f"empty cluster {code} retained")
            for pos, slot in enumerate(self._members[row, :count].tolist()):
                if self._slot_code.get(slot) != code or self._slot_pos.get(slot) != pos:
                    raise IndexCorruptionError(f"slot {slot} misfiled under code {code}")
            seen += count
        if seen != len(self._slot_code):
            raise IndexCorruptionError(
                f"member lists hold {seen} slots but {len(self._slot_code)} are indexed"
            )
        if buffer_len is not None and seen != buffer_len:
            raise IndexCorruptionError(f"index holds {seen} slots, buffer holds {buffer_len}")


def reindex(index: ClusterIndex, codes: Sequence[int]) -> None:
    """Rebuild ``index`` so that slot ``i`` is filed under ``codes[i]``."""
    index.clear()
    for slot, code in enumerate(codes):
        index.insert(slot, int(code))
