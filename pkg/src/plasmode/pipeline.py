"""End-to-end plasmode generation and model comparison.

Every stage reads what earlier stages wrote into the output directory, so
running the stages one by one produces the same tree as :func:`run_pipeline`.

Output layout::

    manifest.json            provenance (config, seeds, versions, stage records)
    data/train.csv, data/test.csv
    mselect_trace.csv, mselect_summary.csv        (m = "auto" only)
    effects.csv, effects.json, test_outcome.csv
    indices/b_0001.txt ...   0-based source rows of each replicate
    plasmodes/b_0001.csv ... (save_plasmodes only)
    metrics.csv, convergence.csv, evaluation.json, quality.json
    report/*.svg
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import svgplot
from .dataio import Dataset, ensure_dir, fmt_float, load_csv, select_columns, split_train_test, write_csv
from .errors import ConfigError, MissingFile, PlasmodeError, StageError, ValidationError
from .metrics import aggregate, convergence_trace, mab, msep
from .mselect import MSelectionConfig, read_summary, select_m, write_trace
from .ogm import (
    EffectSpec,
    effects_from_lasso,
    effects_manual,
    generate_outcome,
    linear_predictor,
    quality_check,
    read_effects,
    sparsity_summary,
    write_effects,
)
from .regress import CvSpec, fit_lasso_cv, fit_lmm_reml, fit_ridge_cv
from .resampler import ResamplingPlan, Scheme, derive_seed, make_replicate, materialize, read_indices, write_indices, write_plasmode

log = logging.getLogger(__name__)

MODELS = ("ridge_cv", "lmm_reml", "lasso_cv")
TIMESTAMP_FIELD = "created_at"


# --- configuration -------------------------------------------------------------


@dataclass
class SplitConfig:
    ratio: list = field(default_factory=lambda: [2, 1])
    seed: int = 0


@dataclass
class ColumnsConfig:
    k: int | None = None
    seed: int = 0


@dataclass
class ResamplingConfig:
    scheme: str = "with_replacement"
    m: object = "auto"
    N: int = 500
    master_seed: int = 0
    cluster_column: str | None = None


@dataclass
class MSelectConfig:
    q: float = 0.97
    B: int = 100
    statistic: str = "lw_cov_norm"
    distance: str = "wasserstein1"
    m_floor: int | None = None
    seed: int = 0
    norm: str = "frobenius"


@dataclass
class OgmConfig:
    source: str = "lasso"
    mu: float = 0.0
    effects: dict = field(default_factory=dict)
    path: str | None = None
    noise_sd: float = 0.0
    link: str = "identity"
    seed: int = 0


@dataclass
class CvConfig:
    folds: int = 10
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    seed: int = 0


@dataclass
class ConvergenceConfig:
    window: int = 50
    tol: float = 0.005


@dataclass
class QualityConfig:
    bins: int = 15
    ks_threshold: float = 0.2
    n_show: int = 3


@dataclass
class AdempConfig:
    aims: str = ""
    data_generating_mechanism: str = ""
    estimands: str = ""
    methods: str = ""
    performance: str = ""


@dataclass
class PipelineConfig:
    input: str | None = None
    outcome_column: str | None = None
    id_column: bool | None = None
    split: SplitConfig = field(default_factory=SplitConfig)
    columns: ColumnsConfig = field(default_factory=ColumnsConfig)
    resampling: ResamplingConfig = field(default_factory=ResamplingConfig)
    mselect: MSelectConfig = field(default_factory=MSelectConfig)
    ogm: OgmConfig = field(default_factory=OgmConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    models: list = field(default_factory=lambda: ["ridge_cv", "lmm_reml"])
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    quality: QualityConfig = field(default_factory=QualityConfig)
    ademp: AdempConfig = field(default_factory=AdempConfig)
    output: str = "out"
    save_plasmodes: bool = False
    n_jobs: int = 1

    # ---- construction / validation ----

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "config")

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"no such config file: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        cfg = cls.from_dict(data)
        if cfg.input is not None and not Path(cfg.input).is_absolute():
            cfg.input = str(path.parent / cfg.input)
        if cfg.ogm.path is not None and not Path(cfg.ogm.path).is_absolute():
            cfg.ogm.path = str(path.parent / cfg.ogm.path)
        return cfg

    def to_dict(self):
        return dataclasses.asdict(self)

    def validate(self):
        if not self.input:
            raise ConfigError("no input file given (set 'input' in the config or pass --input)")
        if len(self.split.ratio) != 2:
            raise ConfigError("split.ratio must have two entries")
        Scheme.parse(self.resampling.scheme)
        m = self.resampling.m
        if m != "auto" and not (isinstance(m, int) and not isinstance(m, bool) and m >= 1):
            raise ConfigError(f"resampling.m must be 'auto' or a positive integer, got {m!r}")
        if self.resampling.N < 1:
            raise ConfigError(f"resampling.N must be >= 1, got {self.resampling.N}")
        self.mselect_config()
        self.cv_spec()
        if not self.models:
            raise ConfigError("at least one evaluation model is required")
        for mdl in self.models:
            if mdl not in MODELS:
                raise ConfigError(f"unknown model {mdl!r}; choose from {list(MODELS)}")
        if self.ogm.source not in ("lasso", "manual", "file"):
            raise ConfigError(f"ogm.source must be 'lasso', 'manual' or 'file', got {self.ogm.source!r}")
        if self.ogm.source == "lasso" and not self.outcome_column:
            raise ConfigError("ogm.source 'lasso' needs an outcome_column")
        if self.ogm.source == "file" and not self.ogm.path:
            raise ConfigError("ogm.source 'file' needs ogm.path")
        if self.ogm.link not in ("identity", "logit"):
            raise ConfigError(f"ogm.link must be 'identity' or 'logit', got {self.ogm.link!r}")
        if self.ogm.noise_sd < 0:
            raise ConfigError("ogm.noise_sd must be >= 0")
        if self.convergence.window < 2 or self.convergence.tol <= 0:
            raise ConfigError("convergence.window must be >= 2 and convergence.tol > 0")
        if self.quality.bins < 1:
            raise ConfigError("quality.bins must be >= 1")
        return self

    def mselect_config(self):
        s = self.mselect
        return MSelectionConfig(q=s.q, B=s.B, statistic=s.statistic, distance=s.distance,
                                m_floor=s.m_floor, seed=s.seed, norm=s.norm)

    def cv_spec(self):
        c = self.cv
        return CvSpec(folds=c.folds, seed=c.seed, n_lambda=c.n_lambda, lambda_min_ratio=c.lambda_min_ratio)

    def provenance(self):
        """Config as recorded in the manifest (the output location is left out)."""
        d = self.to_dict()
        d.pop("output")
        d.pop("n_jobs")
        return d


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory() if fields[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _from_dict(type(default), value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def schema_help():
    return json.dumps(PipelineConfig().to_dict(), indent=2)


# --- manifest -------------------------------------------------------------------


def _software():
    import numba

    return {"plasmode": __version__, "numpy": np.__version__, "numba": numba.__version__,
            "python": platform.python_version()}


def read_manifest(out):
    path = Path(out) / "manifest.json"
    if not path.is_file():
        return None
    return json.loads(path.read_text())


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _update_manifest(out, cfg, stage, record):
    man = read_manifest(out) or {
        TIMESTAMP_FIELD: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "stages": {},
        "completed": [],
    }
    man["software"] = _software()
    man["config"] = cfg.provenance()
    man["stages"][stage] = record
    if stage not in man["completed"]:
        man["completed"].append(stage)
    _write_json(Path(out) / "manifest.json", man)
    return man


def _require(out, stage, what):
    man = read_manifest(out)
    if man is None or stage not in man.get("completed", []):
        raise ValidationError(f"{what} needs the '{stage}' stage to have run in {out}")
    return man


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _stage(name):
    """Wrap stage failures with the stage name and completed work."""

    def deco(fn):
        def wrapper(cfg, *args, **kwargs):
            try:
                return fn(cfg, *args, **kwargs)
            except StageError:
                raise
            except PlasmodeError as exc:
                man = read_manifest(cfg.output) or {}
                raise StageError(name, exc, getattr(exc, "replicate", None),
                                 man.get("completed", [])) from exc
        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper

    return deco


# --- stages ----------------------------------------------------------------------


def _load_split(out, cfg):
    d = Path(out) / "data"
    train = load_csv(d / "train.csv", outcome_column=cfg.outcome_column, id_column=True)
    test = load_csv(d / "test.csv", outcome_column=cfg.outcome_column, id_column=True)
    return train, test


@_stage("ingest")
def ingest(cfg):
    """Load the input table, optionally subset columns, split train/test."""
    cfg.validate()
    out = ensure_dir(cfg.output)
    ds = load_csv(cfg.input, outcome_column=cfg.outcome_column, id_column=cfg.id_column)
    p_orig = ds.p
    if cfg.columns.k is not None:
        ds = select_columns(ds, cfg.columns.k, cfg.columns.seed)
    split = split_train_test(ds, tuple(cfg.split.ratio), cfg.split.seed)
    data = ensure_dir(out / "data")
    write_csv(split.train, data / "train.csv")
    write_csv(split.test, data / "test.csv")
    record = {
        "input_sha256": _sha256(cfg.input),
        "n": ds.n,
        "p_original": p_orig,
        "p": ds.p,
        "columns_k": cfg.columns.k,
        "columns_seed": cfg.columns.seed,
        "split_ratio": list(split.ratio),
        "split_seed": split.seed,
        "n_train": split.train.n,
        "n_test": split.test.n,
        "outcome_column": cfg.outcome_column,
    }
    _update_manifest(out, cfg, "ingest", record)
    return split


@_stage("select-m")
def select_m_stage(cfg):
    """Choose m adaptively (only when ``resampling.m`` is ``"auto"``)."""
    cfg.validate()
    out = Path(cfg.output)
    _require(out, "ingest", "select-m")
    mcfg = cfg.mselect_config()
    if cfg.resampling.m != "auto":
        record = {"skipped": True, "m": cfg.resampling.m}
        _update_manifest(out, cfg, "select-m", record)
        return None
    train, _ = _load_split(out, cfg)
    result = select_m(train, mcfg)
    write_trace(result, out)
    record = {
        "skipped": False,
        "m_star": result.m_star,
        "n": train.n,
        "q": mcfg.q,
        "B": mcfg.B,
        "statistic": mcfg.statistic.value,
        "distance": mcfg.distance.value,
        "norm": mcfg.norm.value,
        "m_floor": mcfg.floor_for(train.n),
        "seed": mcfg.seed,
        "n_candidates": int(result.candidates.size),
        "tie_break": "larger m",
    }
    _update_manifest(out, cfg, "select-m", record)
    return result


def resolve_m(cfg, out):
    if cfg.resampling.m != "auto":
        return int(cfg.resampling.m)
    man = _require(out, "select-m", "m = 'auto'")
    rec = man["stages"]["select-m"]
    if rec.get("skipped"):
        raise ValidationError("m = 'auto' but the select-m stage ran with a fixed m; rerun select-m")
    return int(rec["m_star"])


def _effect_spec(cfg, train):
    o = cfg.ogm
    extra = {}
    if o.source == "lasso":
        spec, fit = effects_from_lasso(train, cfg.cv_spec())
        extra = {"lasso_lambda": fit.hyper["lambda"]}
    elif o.source == "manual":
        spec = effects_manual(o.mu, o.effects, train.column_names)
    else:
        spec = read_effects(Path(o.path).parent, csv_path=o.path)
        if spec.column_names != train.column_names:
            raise ValidationError("effects file columns do not match the data columns")
        provenance = spec.provenance.value if spec.provenance.value != "manual" else "literature"
        spec = dataclasses.replace(spec, provenance=provenance)
    spec = dataclasses.replace(spec, noise_sd=o.noise_sd, link=o.link)
    return spec, extra


def frozen_test_outcome(test_X, spec, seed):
    """Evaluation target on the test covariates: noiseless for the identity link."""
    return generate_outcome(test_X, dataclasses.replace(spec, noise_sd=0.0), seed)


@_stage("generate")
def generate(cfg):
    """Draw the N covariate replicates, fix the truth and the test outcome."""
    cfg.validate()
    out = Path(cfg.output)
    _require(out, "ingest", "generate")
    m = resolve_m(cfg, out)
    train, test = _load_split(out, cfg)
    plan = ResamplingPlan(cfg.resampling.scheme, m, cfg.resampling.N, cfg.resampling.master_seed,
                          cfg.resampling.cluster_column).validate(train.n)

    spec, extra = _effect_spec(cfg, train)
    write_effects(spec, out, extra)
    y_test = frozen_test_outcome(test.X, spec, cfg.ogm.seed)
    with open(out / "test_outcome.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "y"])
        for rid, v in zip(test.row_ids, y_test):
            w.writerow([rid, fmt_float(v)])

    for b in range(1, plan.N + 1):
        rep = make_replicate(train.n, plan, b)
        write_indices(out, rep)
        if cfg.save_plasmodes:
            ds_rep = materialize(train, rep)
            y = generate_outcome(ds_rep.X, spec, derive_seed(cfg.ogm.seed, b))
            write_plasmode(out, rep, ds_rep, y)

    record = {
        "scheme": plan.scheme.value,
        "m": plan.m,
        "m_source": "select-m" if cfg.resampling.m == "auto" else "config",
        "N": plan.N,
        "master_seed": plan.master_seed,
        "replicate_seeds": "derive_seed(master_seed, b), SplitMix64",
        "outcome_seeds": "derive_seed(ogm.seed, b)",
        "ogm": {
            "source": cfg.ogm.source,
            "provenance": spec.provenance.value,
            "link": spec.link.value,
            "noise_sd": spec.noise_sd,
            "mu": spec.mu,
            "sparsity": sparsity_summary(spec),
            **extra,
        },
        "plasmodes_saved": bool(cfg.save_plasmodes),
    }
    _update_manifest(out, cfg, "generate", record)
    return plan, spec


def _read_test_outcome(out):
    with open(Path(out) / "test_outcome.csv", newline="") as fh:
        return np.array([float(r["y"]) for r in csv.DictReader(fh)])


def _fit(model, X, y, cv):
    if model == "ridge_cv":
        return fit_ridge_cv(X, y, cv)
    if model == "lasso_cv":
        return fit_lasso_cv(X, y, cv)
    return fit_lmm_reml(X, y)


def evaluate_replicate(b, idx, train_X, test_X, y_test, spec, models, cv, ogm_seed):
    """Fit every model on replicate ``b`` and score it; returns ``[(model, mab, msep)]``."""
    X = train_X[idx]
    y = generate_outcome(X, spec, derive_seed(ogm_seed, b))
    cv_b = cv.with_seed(derive_seed(cv.seed, b))
    rows = []
    for model in models:
        try:
            fit = _fit(model, X, y, cv_b)
        except PlasmodeError as exc:
            exc.replicate = b
            raise
        rows.append((model, mab(fit, spec), msep(fit, test_X, y_test)))
    return rows


@dataclass
class EvaluationReport:
    models: list
    per_replicate: dict      # model -> {"mab": [...], "msep": [...]} ordered by b
    aggregated: dict         # model -> {"mab": float, "msep": float}
    running: dict            # model -> {"mab": [...], "msep": [...]}
    converged_at: dict       # model -> {"mab": int | None, "msep": int | None}
    quality: dict
    manifest: dict


@_stage("evaluate")
def evaluate(cfg):
    """Fit the evaluation models on every replicate and compute MAB / MSEP."""
    cfg.validate()
    out = Path(cfg.output)
    man = _require(out, "generate", "evaluate")
    N = man["stages"]["generate"]["N"]
    train, test = _load_split(out, cfg)
    spec = read_effects(out)
    y_test = _read_test_outcome(out)
    cv = cfg.cv_spec()
    models = list(cfg.models)
    indices = [read_indices(out, b) for b in range(1, N + 1)]

    args = [(b, indices[b - 1], train.X, test.X, y_test, spec, models, cv, cfg.ogm.seed)
            for b in range(1, N + 1)]
    if cfg.n_jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=cfg.n_jobs)(delayed(evaluate_replicate)(*a) for a in args)
    else:
        results = [evaluate_replicate(*a) for a in args]

    per = {mdl: {"mab": [], "msep": []} for mdl in models}
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["b", "model", "mab", "msep"])
        for b, rows in enumerate(results, start=1):
            for model, a, s in rows:
                per[model]["mab"].append(a)
                per[model]["msep"].append(s)
                w.writerow([b, model, fmt_float(a), fmt_float(s)])

    win, tol = cfg.convergence.window, cfg.convergence.tol
    running, conv, agg = {}, {}, {}
    for model in models:
        running[model], conv[model], agg[model] = {}, {}, {}
        for measure in ("mab", "msep"):
            vals = per[model][measure]
            running[model][measure], conv[model][measure] = convergence_trace(vals, win, tol)
            agg[model][measure] = aggregate(vals)
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["b", "model", "mab_running", "msep_running"])
        for b in range(1, N + 1):
            for model in models:
                w.writerow([b, model, fmt_float(running[model]["mab"][b - 1]),
                            fmt_float(running[model]["msep"][b - 1])])

    evaluation = {
        "N": N,
        "models": models,
        "aggregated": agg,
        "converged_at": conv,
        "convergence": {"window": win, "tol": tol, "early_stopping": False},
        "msep_denominator": "number of test rows",
    }
    _write_json(out / "evaluation.json", evaluation)

    # quality check of the generated outcomes
    eta_train = linear_predictor(train.X, spec)
    original = train.y if train.y is not None else eta_train
    ys = [generate_outcome(train.X[idx], spec, derive_seed(cfg.ogm.seed, b))
          for b, idx in enumerate(indices, start=1)]
    q = quality_check(original, ys, cfg.quality.bins, cfg.quality.ks_threshold,
                      reference_range=(float(eta_train.min()), float(eta_train.max())))
    qd = q.to_dict()
    qd["original_source"] = "outcome" if train.y is not None else "linear_predictor"
    qd["reference_range_source"] = "linear predictor over the original training rows"
    _write_json(out / "quality.json", qd)

    man = _update_manifest(out, cfg, "evaluate", {
        "models": models,
        "aggregated": agg,
        "converged_at": conv,
        "quality_verdicts": q.verdicts,
    })
    return EvaluationReport(models, per, agg, running, conv, qd, man)


# --- report -----------------------------------------------------------------------


def _read_metrics(out):
    per = {}
    with open(Path(out) / "metrics.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            d = per.setdefault(r["model"], {"mab": [], "msep": []})
            d["mab"].append(float(r["mab"]))
            d["msep"].append(float(r["msep"]))
    return per


def _read_convergence(out):
    run = {}
    with open(Path(out) / "convergence.csv", newline="") as fh:
        for r in csv.DictReader(fh):
            d = run.setdefault(r["model"], {"mab": [], "msep": []})
            d["mab"].append(float(r["mab_running"]))
            d["msep"].append(float(r["msep_running"]))
    return run


def report(out, n_show=None):
    """Render SVG figures from the persisted artifacts of a finished run."""
    out = Path(out)
    for name in ("metrics.csv", "convergence.csv", "evaluation.json", "quality.json"):
        if not (out / name).is_file():
            raise MissingFile(f"{out / name} not found; run 'evaluate' first")
    rep = ensure_dir(out / "report")
    man = read_manifest(out) or {}
    if n_show is None:
        n_show = man.get("config", {}).get("quality", {}).get("n_show", 3)
    per = _read_metrics(out)
    run = _read_convergence(out)
    ev = json.loads((out / "evaluation.json").read_text())
    qual = json.loads((out / "quality.json").read_text())

    svgplot.boxplot({m: v["mab"] for m, v in per.items()}, rep / "mab_boxplot.svg",
                    title="Mean absolute bias per plasmode dataset", ylabel="MAB")
    svgplot.boxplot({m: v["msep"] for m, v in per.items()}, rep / "msep_boxplot.svg",
                    title="Sample-split MSEP per plasmode dataset", ylabel="MSEP")
    for measure, label in (("mab", "MAB"), ("msep", "MSEP")):
        svgplot.line_traces({m: v[measure] for m, v in run.items()}, rep / f"convergence_{measure}.svg",
                            title=f"Running mean of {label}", ylabel=label,
                            marks={m: ev["converged_at"][m][measure] for m in run})
    series = {"original": qual["original"]["histogram"]}
    for lab in list(qual["replicates"])[:n_show]:
        series[lab] = qual["replicates"][lab]["histogram"]
    svgplot.histogram_overlay(series, qual["edges"], rep / "outcome_histograms.svg",
                              title=f"Original vs artificial outcomes ({qual['bins']} bins)")
    if (out / "mselect_summary.csv").is_file():
        cand, dist = read_summary(out)
        svgplot.line_traces({"distance": dist}, rep / "mselect_distances.svg",
                            title="Distance between consecutive candidate m",
                            xlabel="candidate index j (m_j vs m_j+1)", ylabel="distance")
    return sorted(p.name for p in rep.iterdir())


def run_pipeline(cfg):
    """Run every stage in order and return the evaluation report."""
    cfg.validate()
    ingest(cfg)
    select_m_stage(cfg)
    generate(cfg)
    result = evaluate(cfg)
    report(cfg.output, cfg.quality.n_show)
    return result
