import sys
import numpy as np
import pytest

from plasmode.dataio import Dataset


def make_dataset(n, p, seed=0, with_y=False):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n) if with_y else None
    return Dataset(
        row_ids=[f"r{i}" for i in range(1, n + 1)],
        column_names=[f"g{j}" for j in range(1, p + 1)],
        X=X,
        y=y,
        outcome_name="y" if with_y else None,
    )


def write_matrix_csv(path, X, names=None, ids=True, y=None, y_name="y"):
    n, p = X.shape
    names = names or [f"g{j}" for j in range(1, p + 1)]
    header = (["id"] if ids else []) + list(names) + ([y_name] if y is not None else [])
    lines = [",".join(header)]
    for i in range(n):
        row = ([f"r{i + 1}"] if ids else []) + [repr(float(v)) for v in X[i]]
        if y is not None:
            row.append(repr(float(y[i])))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def small_ds():
    return make_dataset(40, 4, seed=1, with_y=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
