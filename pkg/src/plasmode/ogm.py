"""The investigator's "truth": effect specifications, outcome generation and
quality checks of the generated outcomes."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import Dataset, ensure_dir, fmt_float
from .errors import (
    DimensionMismatch,
    EmptyInput,
    IoError,
    MissingFile,
    UnknownColumn,
    ValidationError,
)
from .mselect import ks_distance
from .regress import CvSpec, fit_lasso_cv


class Provenance(str, enum.Enum):
    ESTIMATED_LASSO = "estimated_lasso"
    ESTIMATED_RIDGE = "estimated_ridge"
    MANUAL = "manual"
    LITERATURE = "literature"


class Link(str, enum.Enum):
    IDENTITY = "identity"
    LOGIT = "logit"


@dataclass(frozen=True)
class EffectSpec:
    mu: float
    beta: np.ndarray
    column_names: tuple
    provenance: Provenance = Provenance.MANUAL
    noise_sd: float = 0.0
    link: Link = Link.IDENTITY

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        names = tuple(self.column_names)
        if beta.shape[0] != len(names):
            raise DimensionMismatch(f"{beta.shape[0]} effects for {len(names)} columns")
        if len(set(names)) != len(names):
            raise ValidationError("effect column names must be unique")
        if not np.all(np.isfinite(beta)) or not np.isfinite(self.mu):
            raise ValidationError("effects must be finite")
        if self.noise_sd < 0:
            raise ValidationError(f"noise_sd must be >= 0, got {self.noise_sd}")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "link", Link(self.link))

    @property
    def p(self):
        return self.beta.shape[0]

    def as_dict(self):
        return {b: float(v) for b, v in zip(self.column_names, self.beta)}


def sparsity_summary(spec):
    """Counts and distribution of the nonzero effects."""
    nz = spec.beta[spec.beta != 0]
    out = {
        "n_effects": int(spec.p),
        "n_nonzero": int(nz.size),
        "n_zero": int(spec.p - nz.size),
        "pct_nonzero": 100.0 * nz.size / spec.p,
    }
    if nz.size:
        out.update(median_nonzero=float(np.median(nz)), min_nonzero=float(nz.min()),
                   max_nonzero=float(nz.max()))
    else:
        out.update(median_nonzero=None, min_nonzero=None, max_nonzero=None)
    return out


def effects_from_lasso(train, cv=CvSpec()):
    """Use a cross-validated LASSO fit on the original data as the truth."""
    if train.y is None:
        raise ValidationError("effects_from_lasso needs a dataset with an outcome")
    fit = fit_lasso_cv(train.X, train.y, cv)
    spec = EffectSpec(
        mu=fit.mu_hat,
        beta=fit.beta_hat,
        column_names=train.column_names,
        provenance=Provenance.ESTIMATED_LASSO,
        noise_sd=0.0,
        link=Link.IDENTITY,
    )
    return spec, fit


def effects_manual(mu, entries, p_names, noise_sd=0.0, link="identity", provenance="manual"):
    """Effects set by hand; columns not named in ``entries`` get 0."""
    p_names = list(p_names)
    pos = {c: j for j, c in enumerate(p_names)}
    beta = np.zeros(len(p_names))
    seen = set()
    items = entries.items() if isinstance(entries, dict) else entries
    for name, value in items:
        if name not in pos:
            raise UnknownColumn(f"unknown column {name!r}")
        if name in seen:
            raise ValidationError(f"column {name!r} given more than once")
        seen.add(name)
        beta[pos[name]] = float(value)
    return EffectSpec(mu=mu, beta=beta, column_names=p_names, provenance=provenance,
                      noise_sd=noise_sd, link=link)


def linear_predictor(X, spec):
    if isinstance(X, Dataset):
        if X.column_names != spec.column_names:
            raise DimensionMismatch("dataset columns do not match the effect specification")
        X = X.X
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.p:
        raise DimensionMismatch(f"X has {X.shape[1]} columns, effects have {spec.p}")
    return spec.mu + X @ spec.beta


def generate_outcome(X, spec, seed=0):
    """Artificial outcome for resampled covariates ``X`` under ``spec``.

    Identity link: ``mu + X beta`` plus ``noise_sd`` x standard normal noise
    (no random draw at all when ``noise_sd == 0``). Logit link: Bernoulli
    draws with success probability ``logistic(mu + X beta)``.
    """
    eta = linear_predictor(X, spec)
    if spec.link is Link.LOGIT:
        rng = np.random.default_rng(seed)
        prob = 1.0 / (1.0 + np.exp(-eta))
        return (rng.random(eta.shape[0]) < prob).astype(float)
    if spec.noise_sd == 0:
        return eta
    rng = np.random.default_rng(seed)
    return eta + spec.noise_sd * rng.standard_normal(eta.shape[0])


def write_effects(spec, out_dir, extra=None):
    """``effects.csv`` (column_name, beta) plus the ``effects.json`` sidecar."""
    out_dir = ensure_dir(out_dir)
    try:
        with open(Path(out_dir) / "effects.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["column_name", "beta"])
            for name, b in zip(spec.column_names, spec.beta):
                w.writerow([name, fmt_float(b)])
        side = {"mu": spec.mu, "noise_sd": spec.noise_sd, "link": spec.link.value,
                "provenance": spec.provenance.value}
        if extra:
            side.update(extra)
        (Path(out_dir) / "effects.json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write effects: {exc}") from exc


def read_effects(out_dir, csv_path=None):
    """Load an effect specification written by :func:`write_effects`."""
    out_dir = Path(out_dir)
    csv_path = Path(csv_path) if csv_path else out_dir / "effects.csv"
    side_path = csv_path.with_suffix(".json")
    if not csv_path.is_file():
        raise MissingFile(f"no effects file {csv_path}")
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    side = json.loads(side_path.read_text()) if side_path.is_file() else {}
    return EffectSpec(
        mu=float(side.get("mu", 0.0)),
        beta=[float(r["beta"]) for r in rows],
        column_names=[r["column_name"] for r in rows],
        provenance=side.get("provenance", "manual"),
        noise_sd=float(side.get("noise_sd", 0.0)),
        link=side.get("link", "identity"),
    )


# --- quality checks -----------------------------------------------------------


@dataclass
class QualityReport:
    edges: list
    targets: dict
    pooled: dict
    original: dict
    verdicts: dict
    thresholds: dict
    reference_range: list | None = None
    labels: list = field(default_factory=list)

    def to_dict(self):
        return {
            "bins": len(self.edges) - 1,
            "edges": self.edges,
            "thresholds": self.thresholds,
            "verdicts": self.verdicts,
            "reference_range": self.reference_range,
            "original": self.original,
            "pooled": self.pooled,
            "replicates": self.targets,
        }


def _is_binary(v):
    return bool(np.all((v == 0) | (v == 1)))


def _summary(v, edges, original=None, binary=False):
    counts, _ = np.histogram(v, bins=edges)
    rec = {
        "n": int(v.size),
        "mean": float(np.mean(v)),
        "sd": float(np.std(v)),
        "min": float(np.min(v)),
        "max": float(np.max(v)),
        "histogram": [int(c) for c in counts],
    }
    if original is not None:
        rec["ks_statistic"] = ks_distance(original, v)
    if binary:
        rec["prevalence"] = {"0": float(np.mean(v == 0)), "1": float(np.mean(v == 1))}
    return rec


def shared_edges(vectors, bins):
    lo = min(float(np.min(v)) for v in vectors)
    hi = max(float(np.max(v)) for v in vectors)
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def quality_check(original_y, plasmode_ys, bins=15, ks_threshold=0.2, reference_range=None,
                  labels=None):
    """Compare generated outcomes with the original outcome distribution.

    Histograms share ``bins`` equal-width bins over the range of all vectors.
    Verdicts: the pooled generated range lies inside the original range; the
    pooled KS distance to the original is below ``ks_threshold``; and, when
    ``reference_range`` (e.g. the range of the linear predictor over the
    original rows) is given, the pooled range lies inside it.
    """
    if original_y is None or len(plasmode_ys) == 0:
        raise EmptyInput("quality_check needs the original outcome and at least one generated outcome")
    orig = np.asarray(original_y, dtype=float).reshape(-1)
    ys = [np.asarray(v, dtype=float).reshape(-1) for v in plasmode_ys]
    if orig.size == 0 or any(v.size == 0 for v in ys):
        raise EmptyInput("empty outcome vector")
    labels = list(labels) if labels is not None else [f"b_{i:04d}" for i in range(1, len(ys) + 1)]
    pooled = np.concatenate(ys)
    binary = _is_binary(orig) and _is_binary(pooled)
    edges = shared_edges([orig, *ys], bins)
    targets = {lab: _summary(v, edges, orig, binary) for lab, v in zip(labels, ys)}
    pooled_rec = _summary(pooled, edges, orig, binary)
    verdicts = {
        "range_within_original": bool(pooled.min() >= orig.min() and pooled.max() <= orig.max()),
        "ks_below_threshold": bool(pooled_rec["ks_statistic"] < ks_threshold),
    }
    ref = None
    if reference_range is not None:
        ref = [float(reference_range[0]), float(reference_range[1])]
        verdicts["range_within_reference"] = bool(pooled.min() >= ref[0] and pooled.max() <= ref[1])
    return QualityReport(
        edges=[float(e) for e in edges],
        targets=targets,
        pooled=pooled_rec,
        original=_summary(orig, edges, None, binary),
        verdicts=verdicts,
        thresholds={"ks": float(ks_threshold)},
        reference_range=ref,
        labels=labels,
    )
