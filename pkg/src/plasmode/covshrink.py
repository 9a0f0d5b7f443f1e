"""Sample covariance, Ledoit-Wolf linear shrinkage and matrix norms.

The shrinkage target is ``mu * I`` with ``mu = trace(S) / p`` and the
intensity follows Ledoit & Wolf (2004, "A well-conditioned estimator for
large-dimensional covariance matrices"):

    d2   = ||S - mu I||^2
    b2   = min(d2, (1/m^2) sum_k ||x_k x_k' - S||^2)
    rho  = b2 / d2

with centred rows ``x_k`` and the 1/m sample covariance ``S``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, TooFewRows, ValidationError

log = logging.getLogger(__name__)


class NormKind(str, enum.Enum):
    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown norm {value!r}; expected 'frobenius' or 'spectral'") from None


@dataclass(frozen=True)
class ShrunkenCovariance:
    sigma: np.ndarray
    rho: float
    mu: float
    sample_cov: np.ndarray


def _centered(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise TooFewRows(f"covariance needs at least 2 rows, got {X.shape[0]}")
    return X - X.mean(axis=0)


def sample_covariance(X):
    """Covariance with the maximum-likelihood denominator m."""
    Xc = _centered(X)
    return Xc.T @ Xc / Xc.shape[0]


def _shrinkage_terms(Xc):
    """Return (trace S, ||S||_F^2, rho) computed from the smaller Gram matrix."""
    m, p = Xc.shape
    G = Xc @ Xc.T if p > m else Xc.T @ Xc
    G = G / m
    tr = float(np.trace(G))
    fro2 = float(np.sum(G * G))
    mu = tr / p
    d2 = fro2 - p * mu * mu
    if d2 <= 1e-14 * max(fro2, 1e-300):
        # S is already a multiple of I; any intensity gives the same estimate.
        return tr, fro2, 0.0
    row_sq = np.einsum("ij,ij->i", Xc, Xc)
    b2_bar = (float(np.sum(row_sq**2)) / m - fro2) / m
    if b2_bar > d2:
        log.info("Ledoit-Wolf intensity clipped to 1 (b2=%.6g > d2=%.6g)", b2_bar, d2)
    if b2_bar < 0:
        log.info("Ledoit-Wolf intensity clipped to 0 (b2=%.6g < 0)", b2_bar)
    b2 = min(max(b2_bar, 0.0), d2)
    return tr, fro2, b2 / d2


def ledoit_wolf(X, rho=None):
    """Shrink the sample covariance of ``X`` towards a scaled identity.

    ``rho`` overrides the estimated intensity (used for testing the convex
    combination endpoints).
    """
    Xc = _centered(X)
    m, p = Xc.shape
    S = Xc.T @ Xc / m
    mu = float(np.trace(S)) / p
    if rho is None:
        _, _, rho = _shrinkage_terms(Xc)
    elif not 0.0 <= rho <= 1.0:
        raise ValidationError(f"rho must lie in [0, 1], got {rho}")
    sigma = (1.0 - rho) * S
    sigma[np.diag_indices(p)] += rho * mu
    return ShrunkenCovariance(sigma=sigma, rho=float(rho), mu=mu, sample_cov=S)


def matrix_l2_norm(A, kind="frobenius"):
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix has non-finite entries")
    kind = NormKind.parse(kind)
    if kind is NormKind.FROBENIUS:
        return float(np.sqrt(np.sum(A * A)))
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(A))))


def shrunken_norm(X, kind="frobenius"):
    """Norm of ``ledoit_wolf(X).sigma`` without forming the p x p matrix.

    Works through the m x m Gram matrix when p > m, which keeps the
    m-selection statistic cheap for wide data.
    """
    kind = NormKind.parse(kind)
    Xc = _centered(X)
    m, p = Xc.shape
    tr, fro2, rho = _shrinkage_terms(Xc)
    mu = tr / p
    if kind is NormKind.FROBENIUS:
        val = (1 - rho) ** 2 * fro2 + 2 * (1 - rho) * rho * mu * tr + rho**2 * mu**2 * p
        return float(np.sqrt(max(val, 0.0)))
    G = Xc @ Xc.T if p > m else Xc.T @ Xc
    lam_max = float(np.linalg.eigvalsh(G / m)[-1]) if G.size else 0.0
    # sigma is PSD, so its spectral norm is its top eigenvalue
    return float((1 - rho) * max(lam_max, 0.0) + rho * mu)


def sample_cov_norm(X, kind="frobenius"):
    kind = NormKind.parse(kind)
    Xc = _centered(X)
    m, p = Xc.shape
    G = (Xc @ Xc.T if p > m else Xc.T @ Xc) / m
    if kind is NormKind.FROBENIUS:
        return float(np.sqrt(np.sum(G * G)))
    return float(max(np.linalg.eigvalsh(G)[-1], 0.0))
