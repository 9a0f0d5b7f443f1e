import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasmode.errors import BadWindow, DimensionMismatch, EmptyInput
from plasmode.metrics import aggregate, convergence_trace, mab, msep, running_sums
from plasmode.ogm import EffectSpec
from plasmode.regress import FitResult, ModelKind


def _fit(mu, beta):
    return FitResult(mu, np.asarray(beta, dtype=float), {}, ModelKind.RIDGE)


def test_mab_examples():
    truth = EffectSpec(0.0, [0.0], ["a"])
    assert mab(_fit(1.0, [1.0]), truth) == 1.0
    t3 = EffectSpec(0.5, [1.0, -2.0, 0.0], ["a", "b", "c"])
    assert mab(_fit(0.5, [1.0, -2.0, 0.0]), t3) == 0.0
    with pytest.raises(DimensionMismatch):
        mab(_fit(0.0, [1.0]), t3)


def test_mab_permutation_invariant():
    rng = np.random.default_rng(0)
    b, bh = rng.standard_normal(6), rng.standard_normal(6)
    perm = rng.permutation(6)
    names = [f"g{j}" for j in range(6)]
    a = mab(_fit(0.3, bh), EffectSpec(0.1, b, names))
    c = mab(_fit(0.3, bh[perm]), EffectSpec(0.1, b[perm], [names[j] for j in perm]))
    assert a == pytest.approx(c, rel=1e-15)


def test_msep_examples():
    X = np.random.default_rng(1).standard_normal((20, 3))
    beta = np.array([1.0, 0.0, -1.0])
    y = 0.5 + X @ beta
    assert msep(_fit(0.5, beta), X, y) == pytest.approx(0.0, abs=1e-28)
    assert msep(_fit(float(np.mean(y)), np.zeros(3)), X, y) == pytest.approx(np.var(y), rel=1e-12)
    assert msep(_fit(3.0, [0.0]), [[0.0]], [1.0]) == 4.0
    with pytest.raises(DimensionMismatch):
        msep(_fit(0.0, [0.0]), [[0.0], [1.0]], [1.0])


def test_aggregate_examples():
    assert aggregate([2.5]) == 2.5
    assert aggregate([1.0, 2.0, 3.0]) == 2.0
    with pytest.raises(EmptyInput):
        aggregate([])


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_aggregate_follows_replicate_order(values, rnd):
    indexed = list(enumerate(values))
    rnd.shuffle(indexed)
    restored = [v for _, v in sorted(indexed)]
    s = 0.0
    for v in values:
        s += v
    assert aggregate(restored) == s / len(values)
    assert running_sums(values)[-1] == s


def test_convergence_examples():
    running, at = convergence_trace([3.0] * 12, w=5, tol=1e-3)
    assert at == 5 and running == [3.0] * 12
    _, at = convergence_trace([float(k * k) for k in range(1, 200)], w=5, tol=1e-3)
    assert at is None
    with pytest.raises(BadWindow):
        convergence_trace([1.0, 2.0], w=1)


def test_convergence_matches_brute_force():
    vals = np.random.default_rng(3).normal(5.0, 1.0, 600).tolist()
    running, at = convergence_trace(vals, w=50, tol=0.01)
    brute = []
    for k in range(1, len(vals) + 1):
        s = 0.0
        for v in vals[:k]:
            s += v
        brute.append(s / k)
    assert running == brute
    assert at is not None and at >= 50
    window = brute[at - 50:at]
    assert max(abs(r - brute[at - 1]) for r in window) / abs(brute[at - 1]) < 0.01
    for k in range(50, at):
        w = brute[k - 50:k]
        assert max(abs(r - brute[k - 1]) for r in w) / abs(brute[k - 1]) >= 0.01
