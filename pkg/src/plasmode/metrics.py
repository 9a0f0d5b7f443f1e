"""Performance measures over plasmode replicates and their convergence in N."""

from __future__ import annotations

import numpy as np

from .errors import BadWindow, DimensionMismatch, EmptyInput, ValidationError
from .regress import predict


def mab(fit, truth):
    """Mean absolute bias of (intercept, effects) against the true values."""
    if fit.p != truth.p:
        raise DimensionMismatch(f"fit has {fit.p} effects, truth has {truth.p}")
    err = abs(fit.mu_hat - truth.mu) + float(np.sum(np.abs(fit.beta_hat - truth.beta)))
    return err / (truth.p + 1)


def msep(fit, X_test, y_test):
    """Mean squared prediction error over the test rows."""
    y_test = np.asarray(y_test, dtype=float).reshape(-1)
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_test.shape[0] != y_test.shape[0]:
        raise DimensionMismatch(f"{X_test.shape[0]} test rows but {y_test.shape[0]} outcomes")
    resid = predict(fit, X_test) - y_test
    return float(np.mean(resid**2))


def running_sums(values):
    """Left-to-right partial sums (plain sequential float addition)."""
    out = []
    s = 0.0
    for v in values:
        s += float(v)
        out.append(s)
    return out


def aggregate(values):
    """Arithmetic mean with summation in the given (replicate) order."""
    values = list(values)
    if not values:
        raise EmptyInput("cannot aggregate an empty sequence")
    return running_sums(values)[-1] / len(values)


def convergence_trace(values, w=50, tol=0.005):
    """Running means and the first index at which they have stabilised.

    ``running[k-1]`` is the mean of the first ``k`` values. ``converged_at``
    is the smallest ``k >= w`` for which every running mean in the trailing
    window ``k-w+1..k`` is within ``tol`` (relative) of ``running[k-1]``;
    ``None`` if that never happens.
    """
    if w < 2:
        raise BadWindow(f"window must be >= 2, got {w}")
    if tol <= 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    sums = running_sums(values)
    running = [s / k for k, s in enumerate(sums, start=1)]
    converged_at = None
    for k in range(w, len(running) + 1):
        ref = running[k - 1]
        window = running[k - w:k]
        spread = max(abs(r - ref) for r in window)
        if spread == 0 or (ref != 0 and spread / abs(ref) < tol):
            converged_at = k
            break
    return running, converged_at
