"""Penalised regression fitters: ridge, LASSO and a variance-components LMM.

All fitters take an unpenalised intercept. Ridge and the LMM work on the raw
(centred) covariate scale, which makes the BLUP of the LMM at variance ratio
``gamma = sigma_eps2 / sigma_beta2`` identical to ridge at ``lambda = gamma``.
LASSO standardises columns internally and reports coefficients on the
original scale.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import (
    DegenerateKernel,
    DimensionMismatch,
    NoConvergence,
    SingularSystem,
    TooFewRows,
    ValidationError,
)

log = logging.getLogger(__name__)


class ModelKind(str, enum.Enum):
    LASSO = "lasso"
    RIDGE = "ridge"
    LMM = "lmm"


@dataclass
class FitResult:
    mu_hat: float
    beta_hat: np.ndarray
    hyper: dict
    model_kind: ModelKind
    info: dict = field(default_factory=dict, repr=False)

    @property
    def p(self):
        return self.beta_hat.shape[0]


@dataclass(frozen=True)
class CvSpec:
    """Cross-validation settings.

    ``lambda_grid=None`` builds a ``n_lambda``-point log grid from the
    model's ``lambda_max`` down to ``lambda_min_ratio * lambda_max``.
    """

    folds: int = 10
    lambda_grid: tuple | None = None
    seed: int = 0
    selection: str = "min_cv_error"
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4

    def __post_init__(self):
        if self.folds < 2:
            raise ValidationError(f"folds must be >= 2, got {self.folds}")
        if self.selection != "min_cv_error":
            raise ValidationError(f"unsupported selection rule {self.selection!r}")
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            if not grid or any(v <= 0 for v in grid):
                raise ValidationError("lambda grid must be nonempty and positive")
            if any(b >= a for a, b in zip(grid, grid[1:])):
                raise ValidationError("lambda grid must be strictly decreasing")
            object.__setattr__(self, "lambda_grid", grid)
        if self.n_lambda < 1 or not 0 < self.lambda_min_ratio < 1:
            raise ValidationError("need n_lambda >= 1 and lambda_min_ratio in (0, 1)")

    def with_seed(self, seed):
        return CvSpec(self.folds, self.lambda_grid, seed, self.selection,
                      self.n_lambda, self.lambda_min_ratio)


def _check_xy(X, y, min_rows=2):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-d, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if X.shape[0] < min_rows:
        raise TooFewRows(f"need at least {min_rows} rows, got {X.shape[0]}")
    return X, y


def fold_ids(m, folds, seed):
    """Balanced fold labels ``0..folds-1`` assigned by a seeded permutation."""
    if folds > m:
        raise ValidationError(f"{folds} folds for {m} rows")
    ids = np.empty(m, dtype=np.int64)
    ids[np.random.default_rng(seed).permutation(m)] = np.arange(m) % folds
    return ids


def log_grid(lam_max, n, ratio):
    if n == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(ratio), n)


def predict(fit, X_new):
    X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
    if X_new.shape[1] != fit.p:
        raise DimensionMismatch(f"X_new has {X_new.shape[1]} columns, model has {fit.p}")
    return fit.mu_hat + X_new @ fit.beta_hat


# --- ridge ------------------------------------------------------------------


def fit_ridge(X, y, lam):
    """Ridge: minimise ``||y - mu - X beta||^2 + lam ||beta||^2``.

    Uses the m x m dual system when p > m.
    """
    X, y = _check_xy(X, y)
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    m, p = X.shape
    xbar, ybar = X.mean(axis=0), y.mean()
    Xc, yc = X - xbar, y - ybar
    if p > m:
        A = Xc @ Xc.T
        A[np.diag_indices(m)] += lam
        if lam == 0 and np.linalg.matrix_rank(A) < m:
            raise SingularSystem("ridge with lambda=0 and p > m has a singular dual system")
        try:
            beta = Xc.T @ np.linalg.solve(A, yc)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    else:
        A = Xc.T @ Xc
        A[np.diag_indices(p)] += lam
        if lam == 0 and np.linalg.matrix_rank(A) < p:
            raise SingularSystem("ridge with lambda=0 on collinear columns")
        try:
            beta = np.linalg.solve(A, Xc.T @ yc)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    return FitResult(
        mu_hat=float(ybar - xbar @ beta),
        beta_hat=beta,
        hyper={"lambda": float(lam)},
        model_kind=ModelKind.RIDGE,
    )


def ridge_lambda_max(X):
    """Top of the default ridge grid: the mean nonzero eigenvalue of the
    centred Gram matrix, ``||Xc||_F^2 / min(m - 1, p)``.

    At this penalty roughly half of the spectrum is shrunk by more than a
    factor two, so the grid spans moderate to negligible shrinkage.
    """
    m, p = X.shape
    Xc = X - X.mean(axis=0)
    total = float(np.sum(Xc * Xc))
    return total / max(min(m - 1, p), 1) if total > 0 else 1.0


def _ridge_path(Xtr, ytr, lams):
    """Coefficients (p x L) and intercepts (L,) for every lambda via one SVD."""
    xbar, ybar = Xtr.mean(axis=0), ytr.mean()
    U, s, Vt = np.linalg.svd(Xtr - xbar, full_matrices=False)
    uy = U.T @ (ytr - ybar)
    shrink = s[:, None] / (s[:, None] ** 2 + lams[None, :])
    B = Vt.T @ (shrink * uy[:, None])
    return B, ybar - xbar @ B


def fit_ridge_cv(X, y, cv=CvSpec()):
    """Ridge with lambda minimising the pooled held-out squared error."""
    X, y = _check_xy(X, y)
    m = X.shape[0]
    grid = np.array(cv.lambda_grid) if cv.lambda_grid is not None else \
        log_grid(ridge_lambda_max(X), cv.n_lambda, cv.lambda_min_ratio)
    ids = fold_ids(m, cv.folds, cv.seed)
    sse = np.zeros(grid.size)
    for k in range(cv.folds):
        te = ids == k
        B, b0 = _ridge_path(X[~te], y[~te], grid)
        resid = y[te][:, None] - (X[te] @ B + b0[None, :])
        sse += np.sum(resid**2, axis=0)
    cv_err = sse / m
    best = int(np.argmin(cv_err))
    fit = fit_ridge(X, y, float(grid[best]))
    fit.info.update(lambda_grid=grid, cv_error=cv_err)
    return fit


# --- lasso ------------------------------------------------------------------


def _standardize(X):
    xbar = X.mean(axis=0)
    Xc = X - xbar
    sd = np.sqrt(np.mean(Xc * Xc, axis=0))
    usable = sd > 1e-12 * max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    Z = np.zeros_like(Xc)
    Z[:, usable] = Xc[:, usable] / sd[usable]
    return np.asfortranarray(Z), xbar, sd, usable


def lasso_lambda_max(X, y):
    """Smallest lambda with an all-zero LASSO solution (standardised scale)."""
    X, y = _check_xy(X, y)
    Z, _, _, _ = _standardize(X)
    return float(np.max(np.abs(Z.T @ (y - y.mean())))) / X.shape[0]


@numba.njit(cache=True)
def _cd_sweeps(Z, beta, r, work, lam, tol, max_iter):
    """Cyclic soft-threshold updates over ``work`` until the largest change < tol.

    Updates ``beta`` and the residual ``r`` in place.
    """
    m = Z.shape[0]
    max_change = np.inf
    for _ in range(max_iter):
        max_change = 0.0
        for j in work:
            g = 0.0
            for i in range(m):
                g += Z[i, j] * r[i]
            old = beta[j]
            u = old + g / m
            new = max(abs(u) - lam, 0.0)
            if u < 0:
                new = -new
            if new != old:
                d = new - old
                for i in range(m):
                    r[i] -= d * Z[i, j]
                beta[j] = new
                if abs(d) > max_change:
                    max_change = abs(d)
        if max_change < tol:
            return True, max_change
    return False, max_change


class _LassoSolver:
    """Coordinate descent on ``(1/2m)||r||^2 + lam ||b||_1`` with unit-variance columns.

    Keeps the coefficient vector and residual between calls so a decreasing
    lambda sequence is solved with warm starts. Each solve iterates on a
    screened working set (sequential strong rule) and enlarges it until no
    excluded coordinate violates its optimality condition.
    """

    def __init__(self, Z, yc, tol=1e-7, max_iter=100000):
        self.Z = Z
        self.m, self.p = Z.shape
        self.beta = np.zeros(self.p)
        self.r = yc.copy()
        self.tol = tol
        self.max_iter = max_iter
        self.lam_prev = None

    def _sweeps(self, work, lam):
        converged, max_change = _cd_sweeps(self.Z, self.beta, self.r, work, lam,
                                           self.tol, self.max_iter)
        if not converged:
            raise NoConvergence(self.max_iter, max_change, lam)

    def solve(self, lam):
        grad = self.Z.T @ self.r / self.m
        if not self.beta.any() and np.max(np.abs(grad), initial=0.0) <= lam:
            # zero already satisfies the optimality conditions exactly
            self.lam_prev = lam
            return self.beta
        prev = self.lam_prev if self.lam_prev is not None else lam
        work = (np.abs(grad) >= 2 * lam - prev) | (self.beta != 0)
        while True:
            self._sweeps(np.flatnonzero(work), lam)
            grad = self.Z.T @ self.r / self.m
            violators = ~work & (np.abs(grad) > lam)
            if not violators.any():
                break
            work |= violators
        self.lam_prev = lam
        return self.beta


# a path stops once this fraction of the null deviance is explained
DEV_RATIO_MAX = 0.999


def _lasso_path(X, y, lams, tol, max_iter, truncate=False):
    """Original-scale coefficients (p x L) and intercepts along a decreasing grid.

    With ``truncate`` the path stops after the first lambda whose fit
    explains ``DEV_RATIO_MAX`` of the null deviance; the remaining columns
    repeat that solution. Returns ``(B, intercepts, n_solved)``.
    """
    Z, xbar, sd, usable = _standardize(X)
    ybar = y.mean()
    yc = y - ybar
    null_dev = float(yc @ yc)
    solver = _LassoSolver(Z, yc, tol, max_iter)
    B = np.zeros((X.shape[1], len(lams)))
    n_solved = len(lams)
    for k, lam in enumerate(lams):
        b = solver.solve(float(lam))
        B[usable, k] = b[usable] / sd[usable]
        if truncate and null_dev > 0 and 1.0 - float(solver.r @ solver.r) / null_dev >= DEV_RATIO_MAX:
            B[:, k + 1:] = B[:, [k]]
            n_solved = k + 1
            break
    return B, ybar - xbar @ B, n_solved


def fit_lasso(X, y, lam, tol=1e-7, max_iter=100000, path=None):
    """LASSO with objective ``(1/2m)||y - mu - X beta||^2 + lam ||beta||_1``.

    ``lam`` applies to standardised columns. When ``path`` (a decreasing
    sequence ending at ``lam``) is given, the solution is reached by warm
    starts along it.
    """
    X, y = _check_xy(X, y)
    if lam < 0:
        raise ValidationError(f"lambda must be >= 0, got {lam}")
    lams = [float(lam)] if path is None else [float(v) for v in path]
    if lams[-1] != lam:
        lams.append(float(lam))
    B, b0, _ = _lasso_path(X, y, lams, tol, max_iter)
    return FitResult(
        mu_hat=float(b0[-1]),
        beta_hat=B[:, -1].copy(),
        hyper={"lambda": float(lam)},
        model_kind=ModelKind.LASSO,
    )


def fit_lasso_cv(X, y, cv=CvSpec(), tol=1e-7, max_iter=100000):
    """LASSO with lambda minimising the pooled held-out squared error.

    The full-data path is computed first and truncated once it explains
    99.9% of the deviance; folds are evaluated on the retained lambdas.
    """
    X, y = _check_xy(X, y)
    m = X.shape[0]
    if cv.lambda_grid is not None:
        grid = np.array(cv.lambda_grid)
    else:
        lam_max = lasso_lambda_max(X, y)
        grid = log_grid(lam_max if lam_max > 0 else 1.0, cv.n_lambda, cv.lambda_min_ratio)
    B_full, b0_full, n_solved = _lasso_path(X, y, grid, tol, max_iter, truncate=True)
    grid = grid[:n_solved]
    ids = fold_ids(m, cv.folds, cv.seed)
    sse = np.zeros(grid.size)
    for k in range(cv.folds):
        te = ids == k
        B, b0, _ = _lasso_path(X[~te], y[~te], grid, tol, max_iter, truncate=True)
        resid = y[te][:, None] - (X[te] @ B + b0[None, :])
        sse += np.sum(resid**2, axis=0)
    cv_err = sse / m
    best = int(np.argmin(cv_err))
    return FitResult(
        mu_hat=float(b0_full[best]),
        beta_hat=B_full[:, best].copy(),
        hyper={"lambda": float(grid[best])},
        model_kind=ModelKind.LASSO,
        info={"lambda_grid": grid, "cv_error": cv_err},
    )


def lasso_kkt(X, y, fit):
    """Optimality audit of a LASSO fit on the standardised scale.

    Returns ``(max_zero_violation, max_active_violation)``: the largest
    ``|z_j'r/m| - lam`` over zero coefficients and the largest
    ``|z_j'r/m - lam sign(beta_j)|`` over nonzero ones.
    """
    X, y = _check_xy(X, y)
    lam = fit.hyper["lambda"]
    Z, _, sd, usable = _standardize(X)
    r = y - predict(fit, X)
    grad = Z.T @ r / X.shape[0]
    nz = fit.beta_hat != 0
    zero = usable & ~nz
    zero_viol = float(np.max(np.abs(grad[zero]) - lam)) if zero.any() else -np.inf
    act_viol = float(np.max(np.abs(grad[nz] - lam * np.sign(fit.beta_hat[nz])))) if nz.any() else 0.0
    return zero_viol, act_viol


# --- linear mixed model -------------------------------------------------------

GAMMA_BOUNDS = (1e-6, 1e6)


def blup(X, y, gamma):
    """BLUP of beta and GLS intercept for the variance-components model.

    With ``V ~ X X' + gamma I`` (up to the scale sigma_beta2):
    ``mu = 1'V^-1 y / 1'V^-1 1`` and ``beta = X' V^-1 (y - mu)``.
    Computed from the eigendecomposition of the uncentred kernel ``X X'``.
    """
    X, y = _check_xy(X, y)
    if gamma <= 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    evals, Q = np.linalg.eigh(X @ X.T)
    evals = np.maximum(evals, 0.0)
    return _blup_from_eig(X, y, gamma, evals, Q)


def _blup_from_eig(X, y, gamma, evals, Q):
    w = 1.0 / (evals + gamma)
    Qt1 = Q.T @ np.ones(X.shape[0])
    Qty = Q.T @ y
    mu = float((Qt1 * w) @ Qty / ((Qt1 * w) @ Qt1))
    alpha = Q @ (w * (Qty - mu * Qt1))
    beta = X.T @ alpha
    return FitResult(mu_hat=mu, beta_hat=beta, hyper={"lambda": float(gamma)},
                     model_kind=ModelKind.LMM)


def _golden_min(f, a, b, tol=1e-8, max_iter=200):
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


def fit_lmm_reml(X, y, grid_points=61):
    """REML fit of ``y = mu 1 + X beta + e``, ``beta ~ N(0, s_b I)``, ``e ~ N(0, s_e I)``.

    The ratio ``gamma = s_e / s_b`` is found by a log-grid search refined with
    golden-section; ``s_b`` is profiled out. Returns the BLUP at the estimate.
    A minimum at the upper ratio bound is reported as a pure-noise fit
    (``s_b = 0``, ``beta = 0``).
    """
    X, y = _check_xy(X, y, min_rows=3)
    m = X.shape[0]
    nu = m - 1
    xbar, ybar = X.mean(axis=0), y.mean()
    Xc, yc = X - xbar, y - ybar
    Kc = Xc @ Xc.T
    tr = float(np.trace(Kc))
    if tr <= 1e-12 * max(1.0, float(np.sum(X * X))):
        raise DegenerateKernel("centred kernel X X' is numerically zero")
    yy = float(yc @ yc)
    if yy <= 1e-24 * max(1.0, ybar * ybar) * m:
        return FitResult(
            mu_hat=float(ybar), beta_hat=np.zeros(X.shape[1]),
            hyper={"sigma_beta2": 0.0, "sigma_eps2": 0.0}, model_kind=ModelKind.LMM,
            info={"gamma": math.inf, "boundary": "no_variation"},
        )

    s, U = np.linalg.eigh(Kc)
    keep = s > 1e-10 * s[-1]
    s, U = s[keep], U[:, keep]
    z2 = (U.T @ yc) ** 2
    rest = max(yy - float(z2.sum()), 0.0)
    n_null = nu - s.size

    def neg2ll(t):
        g = math.exp(t)
        quad = float(np.sum(z2 / (s + g))) + (rest / g if n_null > 0 else 0.0)
        sb = max(quad / nu, 1e-300)
        return nu * math.log(sb) + float(np.sum(np.log(s + g))) + n_null * t

    lo, hi = math.log(GAMMA_BOUNDS[0]), math.log(GAMMA_BOUNDS[1])
    ts = np.linspace(lo, hi, grid_points)
    vals = np.array([neg2ll(t) for t in ts])
    k = int(np.argmin(vals))
    boundary = None
    if k == grid_points - 1:
        boundary = "pure_noise"
        t_hat = hi
    else:
        t_hat = _golden_min(neg2ll, ts[max(k - 1, 0)], ts[min(k + 1, grid_points - 1)])
        if k == 0 and t_hat - lo < 1e-6:
            boundary = "pure_signal"
    gamma = math.exp(t_hat)
    quad = float(np.sum(z2 / (s + gamma))) + (rest / gamma if n_null > 0 else 0.0)
    sigma_beta2 = quad / nu
    if boundary == "pure_noise":
        return FitResult(
            mu_hat=float(ybar), beta_hat=np.zeros(X.shape[1]),
            hyper={"sigma_beta2": 0.0, "sigma_eps2": yy / nu}, model_kind=ModelKind.LMM,
            info={"gamma": math.inf, "boundary": boundary},
        )
    fit = blup(X, y, gamma)
    fit.hyper = {"sigma_beta2": sigma_beta2, "sigma_eps2": gamma * sigma_beta2}
    fit.info = {"gamma": gamma, "boundary": boundary}
    return fit


FITTERS = {
    "ridge_cv": fit_ridge_cv,
    "lasso_cv": fit_lasso_cv,
    "lmm_reml": lambda X, y, cv=None: fit_lmm_reml(X, y),
}
