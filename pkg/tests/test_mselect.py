import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import wasserstein_distance
from sklearn.covariance import ledoit_wolf as sk_ledoit_wolf

from plasmode.dataio import Dataset
from plasmode.errors import EmptySample, FloorAboveN, SingleCandidate, ValidationError
from plasmode.mselect import (
    MSelectionConfig, default_m_floor, ks_distance, m_sequence, read_summary, select_m,
    statistic_distribution, wasserstein1, write_trace,
)
from plasmode.resampler import derive_seed, draw_indices

from conftest import make_dataset


def test_m_sequence_examples():
    # third term is ceil(0.97**2 * 732) = ceil(688.7388)
    assert m_sequence(732, 0.97)[:3].tolist() == [732, 711, 689]
    assert m_sequence(10, 0.5, 2).tolist() == [10, 5, 3, 2]
    assert m_sequence(2, 0.97, 2).tolist() == [2]
    with pytest.raises(FloorAboveN):
        m_sequence(5, 0.9, 6)
    with pytest.raises(ValidationError):
        m_sequence(5, 1.0, 2)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(2, 3000), q=st.floats(0.05, 0.995), floor=st.integers(2, 50))
def test_m_sequence_properties(n, q, floor):
    if floor > n:
        return
    seq = m_sequence(n, q, floor).tolist()
    assert seq[0] == n and seq[-1] >= floor
    assert all(a > b for a, b in zip(seq, seq[1:]))
    # every entry is ceil(q^j n) for some j (computed with exact fractions where it matters)
    for m in seq[1:]:
        assert any(math.ceil(round(q**j * n, 9)) == m for j in range(1, 5000) if q**j * n > m - 1)


def test_default_floor():
    assert default_m_floor(100) == 10 and default_m_floor(5000) == 50


def test_constant_columns_give_equal_statistics():
    ds = Dataset([f"r{i}" for i in range(30)], ["a", "b"], np.full((30, 2), 3.0))
    vals = statistic_distribution(ds, 20, 10, "lw_cov_norm", 1)
    assert np.all(vals == vals[0]) and vals[0] == 0.0


def test_statistic_distribution_shape_and_scheme():
    ds = make_dataset(60, 3)
    vals = statistic_distribution(ds, 40, 100, "lw_cov_norm", 5)
    assert vals.shape == (100,) and np.all(np.diff(vals) >= 0)
    with pytest.raises(ValidationError):
        statistic_distribution(ds, 60, 10, "lw_cov_norm", 5, scheme="without_replacement")


def test_wasserstein_examples():
    assert wasserstein1([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert wasserstein1([0.0], [1.0]) == 1.0
    assert wasserstein1([1.0, 2.0, 3.0], [2.0, 3.0, 4.0]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(EmptySample):
        wasserstein1([], [1.0])


def test_ks_examples():
    assert ks_distance([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    assert ks_distance([1.0, 2.0], [1.5, 2.5]) == 0.5


def _brute_ks(a, b):
    def cdf(s, t):
        return sum(1 for v in s if v <= t) / len(s)
    return max(abs(cdf(a, t) - cdf(b, t)) for t in list(a) + list(b))


@settings(max_examples=100, deadline=None)
@given(
    a=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
    b=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
)
def test_distances_match_reference(a, b):
    assert wasserstein1(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-9, abs=1e-9)
    assert ks_distance(a, b) == pytest.approx(_brute_ks(a, b), abs=1e-12)


def _brute_force_selection(ds, cfg):
    """Independent re-run: draws, sklearn Ledoit-Wolf, scipy distance, argmin."""
    cands = [ds.n]
    j = 1
    while True:
        m = math.ceil(round(cfg.q**j * ds.n, 9))
        if m < cfg.floor_for(ds.n):
            break
        if m < cands[-1]:
            cands.append(m)
        j += 1
    samples = []
    for c, m in enumerate(cands):
        cseed = derive_seed(cfg.seed, c + 1)
        vals = []
        for it in range(1, cfg.B + 1):
            idx = draw_indices("with_replacement", ds.n, m, derive_seed(cseed, it))
            sigma, _ = sk_ledoit_wolf(ds.X[idx])
            vals.append(np.linalg.norm(sigma, "fro"))
        samples.append(vals)
    dists = [wasserstein_distance(samples[k], samples[k + 1]) for k in range(len(cands) - 1)]
    best = min(range(len(dists)), key=lambda k: (dists[k], k))
    return cands, samples, dists, cands[best]


def test_select_m_matches_brute_force(tmp_path):
    ds = make_dataset(120, 3, seed=8)
    cfg = MSelectionConfig(q=0.9, B=30, seed=3)
    res = select_m(ds, cfg)
    write_trace(res, tmp_path)
    cands, samples, dists, m_star = _brute_force_selection(ds, cfg)
    assert res.candidates.tolist() == cands
    np.testing.assert_allclose(res.distances, dists, rtol=1e-9, atol=1e-12)
    assert res.m_star == m_star

    # persisted trace reproduces the same decision
    with open(tmp_path / "mselect_trace.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(cands) * cfg.B
    by_m = {}
    for r in rows:
        by_m.setdefault(int(r["m"]), []).append(float(r["statistic_value"]))
    d_re = [wasserstein_distance(by_m[cands[k]], by_m[cands[k + 1]]) for k in range(len(cands) - 1)]
    p_cands, p_dists = read_summary(tmp_path)
    assert p_cands.tolist() == cands
    np.testing.assert_allclose(p_dists, d_re, rtol=1e-9, atol=1e-12)
    assert cands[int(np.argmin(p_dists))] == res.m_star


def test_deterministic_statistic_ties_to_n():
    ds = Dataset([f"r{i}" for i in range(40)], ["a", "b"], np.full((40, 2), 1.5))
    res = select_m(ds, MSelectionConfig(q=0.8, B=5))
    assert np.all(res.distances == 0.0)
    assert res.m_star == 40


def test_select_m_needs_two_candidates():
    ds = make_dataset(10, 2)
    with pytest.raises(SingleCandidate):
        select_m(ds, MSelectionConfig(q=0.5, B=5, m_floor=9))


def test_config_validation():
    with pytest.raises(ValidationError):
        MSelectionConfig(statistic="median")
    with pytest.raises(ValidationError):
        MSelectionConfig(B=1)
    cfg = MSelectionConfig(statistic="SAMPLE_COV_NORM", distance="kolmogorov_smirnov", norm="spectral")
    assert cfg.statistic.value == "sample_cov_norm"


def test_select_m_is_deterministic():
    ds = make_dataset(80, 4, seed=2)
    cfg = MSelectionConfig(q=0.9, B=20, distance="kolmogorov_smirnov", seed=9)
    a, b = select_m(ds, cfg), select_m(ds, cfg)
    assert a.m_star == b.m_star
    np.testing.assert_array_equal(a.distances, b.distances)
