import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distreplay.clustering import ClusterIndex
from distreplay.errors import ConfigError, IndexCorruptionError, NotReadyError
from distreplay.sampling import (
    SamplerConfig,
    Strategy,
    audit_distribution,
    bonferroni_z,
    draw_slots,
    probabilities,
    probability,
    probability_of,
    sample_batch,
)

UNIFORM = SamplerConfig(Strategy.UNIFORM)
EQUAL = SamplerConfig(Strategy.EQUAL_CLUSTER)


def da(beta):
    return SamplerConfig(Strategy.DISTRIBUTION_AWARE, beta)


def index_from_labels(labels):
    idx = ClusterIndex()
    for slot, code in enumerate(labels):
        idx.insert(slot, int(code))
    return idx


def fixture_8_2():
    return index_from_labels([0] * 8 + [1] * 2)


# ---------------------------------------------------------------- probability


def test_beta_one_is_one_over_n():
    idx = fixture_8_2()
    assert all(probability_of(s, da(1.0), 10, idx) == 0.1 for s in range(10))


def test_beta_zero_eight_of_two_clusters():
    assert probability(da(0.0), 10, 8, 2) == 0.0625
    assert probability(EQUAL, 10, 8, 2) == 1 / 16


def test_beta_half_worked_example():
    idx = fixture_8_2()
    assert probability_of(0, da(0.5), 10, idx) == pytest.approx(0.08125, abs=1e-15)
    assert probability_of(9, da(0.5), 10, idx) == pytest.approx(0.175, abs=1e-15)
    assert 8 * 0.08125 + 2 * 0.175 == pytest.approx(1.0, abs=1e-15)
    assert probabilities(da(0.5), 10, idx).sum() == pytest.approx(1.0, abs=1e-15)


def test_probability_errors():
    with pytest.raises(IndexCorruptionError):
        probability(da(0.5), 10, 0, 2)
    with pytest.raises(IndexCorruptionError):
        probability_of(3, da(0.5), 1, index_from_labels([0]))
    with pytest.raises(NotReadyError):
        probabilities(UNIFORM, 0, ClusterIndex())
    idx = index_from_labels([0, 0])
    with pytest.raises(IndexCorruptionError):
        probabilities(UNIFORM, 3, idx)


@pytest.mark.parametrize("beta", [-0.1, 1.5, float("nan")])
def test_beta_out_of_range(beta):
    with pytest.raises(ConfigError):
        da(beta)


def test_effective_beta():
    assert UNIFORM.effective_beta == 1.0 and EQUAL.effective_beta == 0.0
    assert da(0.3).effective_beta == 0.3
    assert SamplerConfig("uniform") == UNIFORM


@settings(max_examples=200, deadline=None)
@given(
    labels=st.lists(st.integers(0, 7), min_size=1, max_size=50),
    beta=st.floats(0.0, 1.0),
)
def test_probabilities_sum_to_one_and_endpoints(labels, beta):
    idx = index_from_labels(labels)
    n = len(labels)
    p = probabilities(da(beta), n, idx)
    assert abs(math.fsum(p) - 1.0) < 1e-12
    np.testing.assert_array_equal(probabilities(da(1.0), n, idx), probabilities(UNIFORM, n, idx))
    np.testing.assert_array_equal(probabilities(da(0.0), n, idx), probabilities(EQUAL, n, idx))


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(1, 1000),
    k=st.integers(1, 50),
    a=st.integers(1, 500),
    b=st.integers(1, 500),
    beta=st.floats(0.0, 0.999),
)
def test_monotone_in_cluster_size(n, k, a, b, beta):
    small, big = min(a, b), max(a, b)
    assert probability(da(beta), n, small, k) >= probability(da(beta), n, big, k)


def test_equal_clusters_equal_size_is_uniform():
    idx = index_from_labels([0, 0, 1, 1, 2, 2])
    np.testing.assert_allclose(probabilities(EQUAL, 6, idx), np.full(6, 1 / 6), rtol=0, atol=1e-16)


# ---------------------------------------------------------------- exact enumeration


def set_partitions(n):
    """All labelings of range(n) in restricted-growth form."""
    def rec(prefix, m):
        if len(prefix) == n:
            yield list(prefix)
            return
        for c in range(m + 1):
            yield from rec(prefix + [c], max(m, c + 1))
    yield from rec([], 0)


def lattice_distribution(beta_frac, labels):
    """Exact slot distribution of draw_slots by evaluating it on a lattice of uniforms.

    The route, first-stage and second-stage uniforms are placed at the
    midpoints of grids fine enough that every floor() inside draw_slots is
    constant on each cell, so cell counts give exact probabilities.
    """
    idx = index_from_labels(labels)
    n = len(labels)
    rows, counts, members = idx.sampling_arrays()
    k = len(rows)
    g0 = beta_frac.denominator
    g1 = math.lcm(n, k)
    g2 = math.lcm(*[int(counts[r]) for r in rows])
    u0 = (np.arange(g0) + 0.5) / g0
    u1 = (np.arange(g1) + 0.5) / g1
    u2 = (np.arange(g2) + 0.5) / g2
    grid = np.array(np.meshgrid(u0, u1, u2, indexing="ij")).reshape(3, -1)
    out = np.empty(grid.shape[1], dtype=np.int64)
    draw_slots(grid, float(beta_frac), n, rows, counts, members, out)
    hits = Counter(out.tolist())
    total = grid.shape[1]
    return [Fraction(hits.get(s, 0), total) for s in range(n)], idx


@pytest.mark.parametrize("beta", [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)])
def test_two_stage_sampler_exact_on_all_small_buffers(beta):
    checked = 0
    for n in range(1, 7):
        for labels in set_partitions(n):
            exact, idx = lattice_distribution(beta, labels)
            sizes = Counter(labels)
            k = len(sizes)
            for s in range(n):
                want = beta * Fraction(1, n) + (1 - beta) * Fraction(1, k * sizes[labels[s]])
                assert exact[s] == want
                assert probability_of(s, da(float(beta)), n, idx) == pytest.approx(float(want), abs=1e-15)
            checked += 1
    assert checked == 1 + 2 + 5 + 15 + 52 + 203


# ---------------------------------------------------------------- draws


def test_single_transition_batch():
    idx = index_from_labels([4])
    slots = sample_batch(16, da(0.5), 1, idx, np.random.default_rng(0))
    assert slots.tolist() == [0] * 16


def test_sample_batch_errors():
    with pytest.raises(NotReadyError):
        sample_batch(4, UNIFORM, 0, ClusterIndex(), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        sample_batch(0, UNIFORM, 1, index_from_labels([0]), np.random.default_rng(0))


def test_uniform_and_beta_one_draw_identically():
    idx = fixture_8_2()
    a = sample_batch(500, UNIFORM, 10, idx, np.random.default_rng(7))
    b = sample_batch(500, da(1.0), 10, idx, np.random.default_rng(7))
    c = sample_batch(500, EQUAL, 10, idx, np.random.default_rng(7))
    d = sample_batch(500, da(0.0), 10, idx, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(c, d)


def test_beta_one_frequencies_l1():
    idx = index_from_labels([0, 0, 0, 1, 1, 2, 3, 3, 3, 3])
    slots = sample_batch(100_000, da(1.0), 10, idx, np.random.default_rng(1))
    freq = np.bincount(slots, minlength=10) / 100_000
    assert np.abs(freq - 0.1).max() < 0.01
    assert np.abs(freq - 0.1).sum() < 0.02


def test_audit_report_shape_and_pass():
    idx = fixture_8_2()
    report = audit_distribution(200_000, da(1.0), 10, idx, np.random.default_rng(3))
    assert len(list(report.rows())) == 10
    assert report.passed
    assert report.max_deviation < 3 / math.sqrt(200_000)


def test_audit_standard_error_scales_inverse_sqrt():
    idx = fixture_8_2()
    small = audit_distribution(10_000, da(0.5), 10, idx, np.random.default_rng(0))
    large = audit_distribution(1_000_000, da(0.5), 10, idx, np.random.default_rng(0))
    np.testing.assert_allclose(small.standard_error / large.standard_error, 10.0)


def test_audit_flags_wrong_sampler():
    # Analytic values for beta=0.5 but the draws come from a differently
    # clustered index of the same length: the audit must notice.
    idx = fixture_8_2()
    report = audit_distribution(200_000, da(0.5), 10, idx, np.random.default_rng(0))
    report.analytic = probabilities(da(0.5), 10, index_from_labels([0] * 5 + [1] * 5))
    assert not report.passed


def test_audit_rejects_inconsistent_index():
    idx = fixture_8_2()
    with pytest.raises(IndexCorruptionError):
        audit_distribution(100, da(0.5), 11, idx, np.random.default_rng(0))


def test_bonferroni_z_grows_with_slots():
    assert bonferroni_z(1) == pytest.approx(2.5758, abs=1e-3)
    assert bonferroni_z(1000) > bonferroni_z(10) > bonferroni_z(1)
