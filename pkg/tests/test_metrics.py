import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from sunpatch.errors import SunpatchError
from sunpatch.metrics import ari, jt_statistic, jtrend, nmi

labelings = st.integers(2, 30).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n), st.lists(st.integers(0, 4), min_size=n, max_size=n))
)


def brute_jt(groups):
    stat = 0.0
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            for x in groups[i]:
                for y in groups[j]:
                    stat += 1.0 if x < y else 0.5 if x == y else 0.0
    return stat


def test_ari_example():
    assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == -0.5


def test_nmi_independent_example():
    assert nmi([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(0.0, abs=1e-15)


def test_identical_and_renamed():
    a = [0, 0, 1, 1, 2, 2, 2]
    b = [5, 5, 9, 9, 1, 1, 1]
    assert ari(a, a) == 1.0 and nmi(a, a) == 1.0
    assert ari(a, b) == 1.0 and nmi(a, b) == pytest.approx(1.0, abs=1e-15)


def test_string_labels():
    assert ari(["x", "x", "y"], ["b", "b", "a"]) == 1.0


def test_constant_labelings():
    assert nmi([1, 1, 1], [1, 2, 3]) == 0.0
    assert ari([1, 1, 1], [1, 1, 1]) == 1.0


def test_length_mismatch():
    with pytest.raises(SunpatchError):
        ari([1, 2], [1, 2, 3])
    with pytest.raises(SunpatchError):
        nmi([], [])


@settings(max_examples=100, deadline=None)
@given(ab=labelings)
def test_against_sklearn(ab):
    a, b = ab
    assert ari(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
    if len(set(a)) > 1 and len(set(b)) > 1:
        assert nmi(a, b) == pytest.approx(normalized_mutual_info_score(a, b, average_method="geometric"), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(ab=labelings)
def test_symmetric(ab):
    a, b = ab
    assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-12)
    assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)
    assert 0.0 <= nmi(a, b) <= 1.0
    assert ari(a, b) <= 1.0


def test_ari_permutation_mean_zero():
    rng = np.random.default_rng(0)
    a = np.repeat(np.arange(4), 10)
    vals = [ari(a, rng.permutation(a)) for _ in range(10_000)]
    assert abs(np.mean(vals)) < 0.02


def test_jt_examples():
    assert jtrend([[1, 2], [3, 4]])["statistic"] == 4
    assert jtrend([[3, 4], [1, 2]])["statistic"] == 0
    res = jtrend([[5, 5], [5, 5, 5], [5]])
    assert res["statistic"] == (2 * 3 + 2 * 1 + 3 * 1) / 2
    assert res["p_value"] == 1.0


@settings(max_examples=100, deadline=None)
@given(
    sizes=st.lists(st.integers(1, 4), min_size=2, max_size=4),
    seed=st.integers(0, 10**6),
    ties=st.booleans(),
)
def test_jt_statistic_brute_force(sizes, seed, ties):
    if sum(sizes) > 12:
        return
    rng = np.random.default_rng(seed)
    groups = [(rng.integers(0, 4, size=s) if ties else rng.normal(size=s)).tolist() for s in sizes]
    assert jt_statistic(groups) == brute_jt(groups)


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(1, 4), min_size=2, max_size=4), seed=st.integers(0, 10**6))
def test_jt_reversal_sums_to_pair_count(sizes, seed):
    rng = np.random.default_rng(seed)
    groups = [rng.normal(size=s).tolist() for s in sizes]
    total = sum(sizes[i] * sizes[j] for i in range(len(sizes)) for j in range(i + 1, len(sizes)))
    assert jt_statistic(groups) + jt_statistic(groups[::-1]) == total


@pytest.mark.parametrize(
    "values,sizes",
    [
        ([0.1, 0.5, 0.7, 1.3, 2.2, 3.0, 4.1], (2, 3, 2)),
        ([1, 1, 2, 2, 2, 3, 4, 4], (3, 2, 3)),
        ([0, 0, 0, 1, 1, 1, 1, 2], (2, 2, 2, 2)),
    ],
)
def test_jt_moments_match_permutation_distribution(values, sizes):
    """Null mean and tie-corrected variance against full enumeration of the pooled sample."""
    stats = []
    cuts = np.cumsum(sizes)[:-1]
    for perm in itertools.permutations(values):
        stats.append(jt_statistic(np.split(np.array(perm, dtype=float), cuts)))
    res = jtrend(np.split(np.array(values, dtype=float), cuts))
    assert res["mean"] == pytest.approx(np.mean(stats), rel=1e-12)
    assert res["variance"] == pytest.approx(np.var(stats), rel=1e-12)


def test_jt_trend_significance():
    rng = np.random.default_rng(0)
    up = [rng.normal(loc=i, size=30) for i in range(3)]
    assert jtrend(up)["p_value"] < 1e-6
    assert jtrend(up)["z"] > 0
    flat = [rng.normal(size=30) for _ in range(3)]
    assert jtrend(flat)["p_value"] > 0.01


def test_jt_errors():
    with pytest.raises(SunpatchError):
        jtrend([[1, 2]])
    with pytest.raises(SunpatchError):
        jtrend([[1], []])
