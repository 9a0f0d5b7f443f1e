"""Command line entry point: ``plasmode <stage> [--config c.json] [overrides]``.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .errors import ComputationError, PlasmodeError, StageError, ValidationError
from .pipeline import PipelineConfig

log = logging.getLogger("plasmode")

STAGES = ("ingest", "select-m", "generate", "evaluate", "report", "run")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_or_auto(text):
    return text if text == "auto" else int(text)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config mirroring PipelineConfig")
    common.add_argument("--out", help="output directory (overrides 'output')")
    common.add_argument("--input", help="input CSV")
    common.add_argument("--outcome-column")
    common.add_argument("--seed", type=int, help="master seed for replicate resampling")
    common.add_argument("--N", type=int, dest="N", help="number of plasmode datasets")
    common.add_argument("--m", type=_int_or_auto, help="resampling size or 'auto'")
    common.add_argument("--scheme", choices=["with_replacement", "without_replacement", "sample_split"])
    common.add_argument("--q", type=float)
    common.add_argument("--B", type=int, dest="B")
    common.add_argument("--statistic", choices=["lw_cov_norm", "sample_cov_norm", "column_mean_norm"])
    common.add_argument("--distance", choices=["wasserstein1", "kolmogorov_smirnov"])
    common.add_argument("--m-floor", type=int)
    common.add_argument("--norm", choices=["frobenius", "spectral"])
    common.add_argument("--models", help="comma-separated subset of ridge_cv,lmm_reml,lasso_cv")
    common.add_argument("--save-plasmodes", action="store_true", default=None)
    common.add_argument("--n-jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="plasmode", description="Statistical plasmode generation and model comparison.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "load, subset and split the input data",
        "select-m": "choose the resampling size adaptively",
        "generate": "draw replicates, fix the truth and the test outcome",
        "evaluate": "fit models per replicate, compute MAB/MSEP and quality checks",
        "report": "render SVG figures from a finished run directory",
        "run": "all stages in order",
    }
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args):
    if args.config:
        cfg = PipelineConfig.from_json(args.config)
    elif args.out and pipeline.read_manifest(args.out) is not None:
        cfg = PipelineConfig.from_dict(pipeline.read_manifest(args.out)["config"])
    else:
        cfg = PipelineConfig()
    if args.out:
        cfg.output = args.out
    if args.input:
        cfg.input = args.input
    if args.outcome_column:
        cfg.outcome_column = args.outcome_column
    r, s = cfg.resampling, cfg.mselect
    for attr, target, key in (
        ("seed", r, "master_seed"), ("N", r, "N"), ("m", r, "m"), ("scheme", r, "scheme"),
        ("q", s, "q"), ("B", s, "B"), ("statistic", s, "statistic"), ("distance", s, "distance"),
        ("m_floor", s, "m_floor"), ("norm", s, "norm"),
    ):
        value = getattr(args, attr)
        if value is not None:
            setattr(target, key, value)
    if args.models:
        cfg.models = [m.strip() for m in args.models.split(",") if m.strip()]
    if args.save_plasmodes:
        cfg.save_plasmodes = True
    if args.n_jobs is not None:
        cfg.n_jobs = args.n_jobs
    return cfg


def _dispatch(args):
    if args.command == "report":
        out = args.out
        if out is None:
            out = PipelineConfig.from_json(args.config).output if args.config else "out"
        for name in pipeline.report(out):
            print(Path(out) / "report" / name)
        return
    cfg = resolve_config(args)
    cfg.validate()
    if args.command == "ingest":
        split = pipeline.ingest(cfg)
        print(f"train: {split.train.n} rows, test: {split.test.n} rows, p = {split.train.p}")
    elif args.command == "select-m":
        res = pipeline.select_m_stage(cfg)
        print("m fixed by config; nothing to select" if res is None else f"m* = {res.m_star}")
    elif args.command == "generate":
        plan, spec = pipeline.generate(cfg)
        print(f"{plan.N} replicates of size {plan.m} ({plan.scheme.value})")
    elif args.command == "evaluate":
        _print_report(pipeline.evaluate(cfg))
    else:
        _print_report(pipeline.run_pipeline(cfg))


def _print_report(rep):
    for model in rep.models:
        a, c = rep.aggregated[model], rep.converged_at[model]
        print(f"{model:10s} MAB {a['mab']:.6g} (stable at {c['mab']})  "
              f"MSEP {a['msep']:.6g} (stable at {c['msep']})")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}\n", file=sys.stderr)
        parser.print_help(sys.stderr)
        print("\nconfig schema (defaults):\n" + pipeline.schema_help(), file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.completed:
            print(f"completed stages: {', '.join(exc.completed)}", file=sys.stderr)
        return 1 if isinstance(exc.cause, ValidationError) else 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ComputationError, PlasmodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
