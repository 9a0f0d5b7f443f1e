"""Acceptance criteria 1-9, each with its stated tolerance and time budget.

Run with ``pytest tests/test_acceptance.py`` (a PASS/FAIL line per criterion
is printed in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

import csv
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import write_matrix_csv  # noqa: E402
from plasmode.covshrink import ledoit_wolf  # noqa: E402
from plasmode.dataio import load_csv  # noqa: E402
from plasmode.mselect import ks_distance, m_sequence, wasserstein1  # noqa: E402
from plasmode.ogm import read_effects  # noqa: E402
from plasmode.pipeline import PipelineConfig, run_pipeline  # noqa: E402
from plasmode.regress import (  # noqa: E402
    CvSpec, blup, fit_lasso, fit_lasso_cv, fit_ridge, lasso_kkt, lasso_lambda_max,
)

pytestmark = pytest.mark.acceptance

RESULTS = {}

TRUTH = {"g2": 1.5, "g5": -2.0, "g9": 0.8}


def _record(num, ok, detail, seconds, budget):
    ok = bool(ok) and seconds < budget
    RESULTS[num] = (ok, f"{detail}; {seconds:.2f}s (budget {budget:g}s)")
    return ok


# --- shared fixed-point run (criteria 6-9) ------------------------------------------


def _fixed_point_input(root):
    path = Path(root) / "fixed_point.csv"
    if not path.exists():
        X = np.random.default_rng(20240601).standard_normal((300, 10))
        write_matrix_csv(path, X)
    return path


def _fixed_point_config(root, out, N):
    return PipelineConfig.from_dict({
        "input": str(_fixed_point_input(root)),
        "split": {"ratio": [2, 1], "seed": 1},
        "resampling": {"scheme": "without_replacement", "m": 200, "N": N, "master_seed": 17},
        "ogm": {"source": "manual", "mu": 0.5, "effects": TRUTH, "noise_sd": 0.0},
        "models": ["ridge_cv", "lmm_reml"],
        "output": str(Path(root) / out),
    })


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _tree(root):
    files = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            data = p.read_bytes()
            if p.name == "manifest.json":
                man = json.loads(data)
                man.pop("created_at")
                data = json.dumps(man, sort_keys=True).encode()
            files[str(p.relative_to(root))] = data
    return files


# --- criteria -------------------------------------------------------------------------


def criterion_1():
    t = time.perf_counter()
    seq = m_sequence(732, 0.97)
    dt = time.perf_counter() - t
    ok = int(seq[1]) == 711
    return _record(1, ok, f"m_sequence(732, 0.97)[1] = {int(seq[1])}, expected 711", dt, 1e-3)


def criterion_2():
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        m, p = int(rng.integers(20, 201)), int(rng.integers(5, 501))
        X = rng.standard_normal((m, p)) * rng.uniform(0.2, 3.0, p) + rng.normal(0, 2, p)
        y = rng.normal(3.0, 1.0) + X @ rng.normal(0, 0.3, p) + rng.standard_normal(m)
        gamma = float(10 ** rng.uniform(-3, 4))
        diff = np.max(np.abs(blup(X, y, gamma).beta_hat - fit_ridge(X, y, gamma).beta_hat))
        worst = max(worst, float(diff))
    dt = time.perf_counter() - t
    return _record(2, worst <= 1e-8, f"50 instances, max |BLUP - ridge| = {worst:.2e} (tol 1e-8)", dt, 30)


def criterion_3():
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, fits, zero_ok = -np.inf, 0, True
    for k in range(30):
        m, p = int(rng.integers(20, 120)), int(rng.integers(2, 300))
        X = rng.standard_normal((m, p)) * rng.uniform(0.5, 2.0, p)
        beta = np.zeros(p)
        beta[: min(5, p)] = rng.normal(0, 2, min(5, p))
        y = X @ beta + rng.standard_normal(m)
        lam_max = lasso_lambda_max(X, y)
        for frac in (0.02, 0.2, 0.7):
            fit = fit_lasso(X, y, frac * lam_max)
            worst = max(worst, *lasso_kkt(X, y, fit))
            fits += 1
        if k % 5 == 0:
            fit = fit_lasso_cv(X, y, CvSpec(seed=k))
            worst = max(worst, *lasso_kkt(X, y, fit))
            fits += 1
        for lam in (lam_max, 1.01 * lam_max, 10 * lam_max):
            zero_ok &= bool(np.all(fit_lasso(X, y, lam).beta_hat == 0.0))
    dt = time.perf_counter() - t
    ok = worst <= 1e-6 and zero_ok
    return _record(3, ok, f"{fits} fits, worst KKT violation {worst:.2e} (tol 1e-6); "
                          f"zero vector at lambda >= lambda_max: {zero_ok}", dt, 30)


def criterion_4():
    t = time.perf_counter()
    rng = np.random.default_rng(4)

    def sample():
        return rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), int(rng.integers(1, 40)))

    bad = 0
    for _ in range(1000):
        a, b = sample(), sample()
        for d in (wasserstein1, ks_distance):
            dab, dba = d(a, b), d(b, a)
            bad += dab < 0 or abs(dab - dba) > 1e-12 or abs(d(a, a)) > 1e-12
    tri = 0
    for _ in range(1000):
        a, b, c = sample(), sample(), sample()
        tri += wasserstein1(a, c) > wasserstein1(a, b) + wasserstein1(b, c) + 1e-12
    dt = time.perf_counter() - t
    return _record(4, bad == 0 and tri == 0,
                   f"axiom violations on 1000 pairs: {bad}; triangle violations on 1000 triples: {tri}",
                   dt, 10)


def criterion_5():
    t = time.perf_counter()
    wins = 0
    I = np.eye(50)
    for seed in range(20):
        X = np.random.default_rng(seed).standard_normal((500, 50))
        sc = ledoit_wolf(X)
        wins += np.linalg.norm(sc.sigma - I) <= np.linalg.norm(sc.sample_cov - I)
    dt = time.perf_counter() - t
    return _record(5, wins >= 18, f"shrunken estimator no worse in {wins}/20 datasets (need 18)", dt, 20)


def criterion_6(root):
    t = time.perf_counter()
    cfg = _fixed_point_config(root, "c6", 25)
    run_pipeline(cfg)
    out = Path(cfg.output)
    y_test = np.array([float(r["y"]) for r in _read_rows(out / "test_outcome.csv")])
    var_y = float(np.var(y_test, ddof=1))
    rows = _read_rows(out / "metrics.csv")
    ev = json.loads((out / "evaluation.json").read_text())
    ok, parts = True, []
    for model in ("ridge_cv", "lmm_reml"):
        mine = [r for r in rows if r["model"] == model]
        ok &= len(mine) == 25
        for measure in ("mab", "msep"):
            mean = float(np.mean([float(r[measure]) for r in mine]))
            ok &= abs(ev["aggregated"][model][measure] - mean) <= 1e-12
        msep = ev["aggregated"][model]["msep"]
        ok &= msep < 0.05 * var_y
        parts.append(f"{model} MSEP {msep:.2e}")
    dt = time.perf_counter() - t
    return _record(6, ok, f"{', '.join(parts)} vs 0.05*var(y_test) = {0.05 * var_y:.3f}; "
                          "aggregates equal CSV means within 1e-12", dt, 120)


def criterion_7(root):
    t = time.perf_counter()
    a = _fixed_point_config(root, "c7a", 25)
    b = _fixed_point_config(root, "c7b", 25)
    run_pipeline(a)
    run_pipeline(b)
    ta, tb = _tree(a.output), _tree(b.output)
    differing = sorted(k for k in set(ta) | set(tb) if ta.get(k) != tb.get(k))
    dt = time.perf_counter() - t
    return _record(7, not differing and len(ta) > 0,
                   f"{len(ta)} files compared, {len(differing)} differ {differing[:3]}", dt, 240)


def criterion_8(root):
    t = time.perf_counter()
    cfg = _fixed_point_config(root, "c8", 200)
    run_pipeline(cfg)
    out = Path(cfg.output)
    metrics = _read_rows(out / "metrics.csv")
    conv = _read_rows(out / "convergence.csv")
    ev = json.loads((out / "evaluation.json").read_text())
    ok = True
    for model in ("ridge_cv", "lmm_reml"):
        m_rows = sorted((int(r["b"]), r) for r in metrics if r["model"] == model)
        c_rows = sorted((int(r["b"]), r) for r in conv if r["model"] == model)
        ok &= [b for b, _ in m_rows] == list(range(1, 201)) == [b for b, _ in c_rows]
        for measure in ("mab", "msep"):
            total, brute = 0.0, []
            for k, (_, r) in enumerate(m_rows, start=1):
                total = total + float(r[measure])
                brute.append(total / k)
            persisted = [float(r[f"{measure}_running"]) for _, r in c_rows]
            ok &= brute == persisted
            ok &= ev["converged_at"][model][measure] is not None
    dt = time.perf_counter() - t
    return _record(8, ok, f"running means match brute force exactly; converged_at = {ev['converged_at']}",
                   dt, 300)


def criterion_9(root):
    t = time.perf_counter()
    cfg = _fixed_point_config(root, "c6", 25)
    out = Path(cfg.output)
    if not (out / "quality.json").exists():
        run_pipeline(cfg)
    spec = read_effects(out)
    train = load_csv(out / "data" / "train.csv")
    eta = spec.mu + train.X @ spec.beta
    pooled = []
    for b in range(1, 26):
        idx = [int(s) for s in (out / "indices" / f"b_{b:04d}.txt").read_text().split()]
        pooled.extend(spec.mu + train.X[idx] @ spec.beta)
    pooled = np.array(pooled)
    q = json.loads((out / "quality.json").read_text())
    ok = pooled.min() >= eta.min() and pooled.max() <= eta.max()
    ok &= q["pooled"]["min"] == pooled.min() and q["pooled"]["max"] == pooled.max()
    ok &= q["verdicts"]["range_within_reference"] is True
    dt = time.perf_counter() - t
    return _record(9, ok, f"pooled range [{pooled.min():.4f}, {pooled.max():.4f}] within "
                          f"predictor range [{eta.min():.4f}, {eta.max():.4f}]", dt, 10)


# --- pytest entry points --------------------------------------------------------------


@pytest.fixture(scope="module")
def run_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def test_criterion_1_m_sequence():
    assert criterion_1(), RESULTS[1][1]


def test_criterion_2_ridge_blup_duality():
    assert criterion_2(), RESULTS[2][1]


def test_criterion_3_lasso_kkt():
    assert criterion_3(), RESULTS[3][1]


def test_criterion_4_distance_axioms():
    assert criterion_4(), RESULTS[4][1]


def test_criterion_5_shrinkage_dominance():
    assert criterion_5(), RESULTS[5][1]


def test_criterion_6_fixed_point(run_root):
    assert criterion_6(run_root), RESULTS[6][1]


def test_criterion_7_determinism(run_root):
    assert criterion_7(run_root), RESULTS[7][1]


def test_criterion_8_convergence_trace(run_root):
    assert criterion_8(run_root), RESULTS[8][1]


def test_criterion_9_quality_containment(run_root):
    assert criterion_9(run_root), RESULTS[9][1]


def report_lines():
    return [f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}" for k, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as root:
        for fn in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5):
            fn()
        for fn in (criterion_6, criterion_7, criterion_8, criterion_9):
            fn(root)
    print("\n".join(report_lines()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
