"""Adaptive choice of the resampling size m.

Candidate sizes ``m_j = ceil(q**j * n)`` are scored by the bootstrap
distribution of a scalar covariance statistic; the chosen size is the one
whose distribution is closest to that of the next smaller candidate
(Bickel & Sakov, 2008).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import covshrink
from .dataio import ensure_dir, fmt_float
from .errors import EmptySample, FloorAboveN, IoError, SingleCandidate, ValidationError
from .resampler import Scheme, derive_seed, draw_indices


class Statistic(str, enum.Enum):
    LW_COV_NORM = "lw_cov_norm"
    SAMPLE_COV_NORM = "sample_cov_norm"
    COLUMN_MEAN_NORM = "column_mean_norm"


class Distance(str, enum.Enum):
    WASSERSTEIN1 = "wasserstein1"
    KOLMOGOROV_SMIRNOV = "kolmogorov_smirnov"


def _enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).lower())
    except ValueError:
        raise ValidationError(
            f"unknown {cls.__name__.lower()} {value!r}; expected one of {[e.value for e in cls]}"
        ) from None


def default_m_floor(n):
    return max(10, math.ceil(0.01 * n))


@dataclass(frozen=True)
class MSelectionConfig:
    q: float = 0.97
    B: int = 100
    statistic: Statistic = Statistic.LW_COV_NORM
    distance: Distance = Distance.WASSERSTEIN1
    m_floor: int | None = None
    seed: int = 0
    norm: covshrink.NormKind = covshrink.NormKind.FROBENIUS

    def __post_init__(self):
        object.__setattr__(self, "statistic", _enum(Statistic, self.statistic))
        object.__setattr__(self, "distance", _enum(Distance, self.distance))
        object.__setattr__(self, "norm", covshrink.NormKind.parse(self.norm))
        if not 0 < self.q < 1:
            raise ValidationError(f"q must lie in (0, 1), got {self.q}")
        if self.B < 2:
            raise ValidationError(f"B must be >= 2, got {self.B}")
        if self.m_floor is not None and self.m_floor < 2:
            raise ValidationError(f"m_floor must be >= 2, got {self.m_floor}")

    def floor_for(self, n):
        return self.m_floor if self.m_floor is not None else default_m_floor(n)


@dataclass
class MSelectionResult:
    m_star: int
    candidates: np.ndarray
    distances: np.ndarray
    # per candidate, in draw order (draw j used derive_seed(candidate_seed, j))
    statistic_samples: list = field(repr=False)


def m_sequence(n, q, m_floor=2):
    """Strictly decreasing candidates ``ceil(q**j * n)`` down to ``m_floor``."""
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    if m_floor < 2:
        raise ValidationError(f"m_floor must be >= 2, got {m_floor}")
    if m_floor > n:
        raise FloorAboveN(f"m_floor={m_floor} exceeds n={n}")
    seq = [int(n)]
    j = 1
    while True:
        x = q**j * n
        # guard against q**j * n landing a hair above an integer
        m = math.ceil(x - 1e-9 * max(1.0, x))
        if m < m_floor:
            break
        if m < seq[-1]:
            seq.append(m)
        j += 1
    return np.array(seq, dtype=np.int64)


def compute_statistic(X, statistic, norm="frobenius"):
    statistic = _enum(Statistic, statistic)
    if statistic is Statistic.LW_COV_NORM:
        return covshrink.shrunken_norm(X, norm)
    if statistic is Statistic.SAMPLE_COV_NORM:
        return covshrink.sample_cov_norm(X, norm)
    return float(np.linalg.norm(np.asarray(X).mean(axis=0)))


def statistic_draws(ds, m, B, statistic, seed, norm="frobenius"):
    """Statistic over ``B`` m-out-of-n bootstrap draws, in draw order.

    Draw ``j`` (1-based) uses ``derive_seed(seed, j)``.
    """
    if B < 1:
        raise ValidationError(f"B must be >= 1, got {B}")
    X = ds.X
    values = np.empty(B)
    for j in range(1, B + 1):
        idx = draw_indices(Scheme.WITH_REPLACEMENT, ds.n, m, derive_seed(seed, j))
        values[j - 1] = compute_statistic(X[idx], statistic, norm)
    return values


def statistic_distribution(ds, m, B, statistic, seed, norm="frobenius",
                           scheme=Scheme.WITH_REPLACEMENT):
    """Sorted bootstrap values of the statistic (see :func:`statistic_draws`)."""
    if Scheme.parse(scheme) is not Scheme.WITH_REPLACEMENT:
        raise ValidationError("m selection uses the m-out-of-n bootstrap; only with_replacement is allowed")
    return np.sort(statistic_draws(ds, m, B, statistic, seed, norm))


def _sample(a):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0:
        raise EmptySample("distance needs nonempty samples")
    return a


def wasserstein1(a, b):
    """1-Wasserstein distance between two empirical distributions.

    Integrates ``|F_a^-1(u) - F_b^-1(u)|`` over ``u`` in (0, 1), where the
    quantile functions are piecewise constant between the breakpoints
    ``i / len(a)`` and ``j / len(b)``.
    """
    a = np.sort(_sample(a))
    b = np.sort(_sample(b))
    na, nb = a.size, b.size
    if na == nb:
        return float(np.mean(np.abs(a - b)))
    u = np.union1d(np.arange(1, na + 1) / na, np.arange(1, nb + 1) / nb)
    u = np.concatenate(([0.0], u))
    mid = 0.5 * (u[:-1] + u[1:])
    qa = a[np.minimum((mid * na).astype(np.int64), na - 1)]
    qb = b[np.minimum((mid * nb).astype(np.int64), nb - 1)]
    return float(np.sum(np.abs(qa - qb) * np.diff(u)))


def ks_distance(a, b):
    """Largest vertical gap between the two empirical CDFs."""
    a = np.sort(_sample(a))
    b = np.sort(_sample(b))
    pts = np.concatenate((a, b))
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def distance_fn(distance):
    distance = _enum(Distance, distance)
    return wasserstein1 if distance is Distance.WASSERSTEIN1 else ks_distance


def select_m(ds, cfg):
    """Pick the candidate m whose statistic distribution is most stable.

    Candidate ``c`` (0-based) draws with seed ``derive_seed(cfg.seed, c + 1)``.
    ``distances[j]`` compares candidates ``j`` and ``j + 1`` and the minimum
    maps to the larger size ``m_j``; ties go to the larger m.
    """
    candidates = m_sequence(ds.n, cfg.q, cfg.floor_for(ds.n))
    if candidates.size < 2:
        raise SingleCandidate(f"only one candidate size for n={ds.n}: {candidates.tolist()}")
    samples = [
        statistic_draws(ds, int(m), cfg.B, cfg.statistic, derive_seed(cfg.seed, c + 1), cfg.norm)
        for c, m in enumerate(candidates)
    ]
    dist = distance_fn(cfg.distance)
    distances = np.array([dist(samples[j], samples[j + 1]) for j in range(len(samples) - 1)])
    j_star = int(np.argmin(distances))  # first minimum = larger m
    return MSelectionResult(
        m_star=int(candidates[j_star]),
        candidates=candidates,
        distances=distances,
        statistic_samples=samples,
    )


def write_trace(result, out_dir):
    """Persist ``mselect_trace.csv`` and ``mselect_summary.csv``."""
    out_dir = ensure_dir(out_dir)
    try:
        with open(Path(out_dir) / "mselect_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "iteration", "statistic_value"])
            for m, vals in zip(result.candidates, result.statistic_samples):
                for it, v in enumerate(vals, start=1):
                    w.writerow([int(m), it, fmt_float(v)])
        with open(Path(out_dir) / "mselect_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m_lo", "m_hi", "distance"])
            for j, d in enumerate(result.distances):
                w.writerow([int(result.candidates[j + 1]), int(result.candidates[j]), fmt_float(d)])
    except OSError as exc:
        raise IoError(f"cannot write m-selection trace: {exc}") from exc


def read_summary(out_dir):
    """Return (candidates, distances) from a persisted summary."""
    path = Path(out_dir) / "mselect_summary.csv"
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    hi = [int(r["m_hi"]) for r in rows]
    candidates = np.array(hi + [int(rows[-1]["m_lo"])], dtype=np.int64)
    return candidates, np.array([float(r["distance"]) for r in rows])
