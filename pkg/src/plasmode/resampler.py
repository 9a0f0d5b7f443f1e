"""Covariate resampling: seeded replicate index draws and materialisation.

Row indices are 0-based throughout (including the persisted audit files).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import Dataset, ensure_dir, write_csv
from .errors import (
    IndexOutOfRange,
    IoError,
    MGreaterThanN,
    MissingFile,
    UnsupportedScheme,
    ValidationError,
)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Scheme(str, enum.Enum):
    WITH_REPLACEMENT = "with_replacement"
    WITHOUT_REPLACEMENT = "without_replacement"
    SAMPLE_SPLIT = "sample_split"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"withreplacement": "with_replacement",
                   "withoutreplacement": "without_replacement",
                   "samplesplit": "sample_split"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(
                f"unknown resampling scheme {value!r}; expected one of {[s.value for s in cls]}"
            ) from None


def derive_seed(master_seed, b):
    """Seed for replicate ``b``: the ``b``-th output of a SplitMix64 stream.

    The stream state starts at ``master_seed`` and advances by the 64-bit
    golden-ratio constant; the output is the SplitMix64 finaliser of the
    state. The state map ``b -> master_seed + b * golden`` is injective mod
    2**64 (the constant is odd) and the finaliser is a bijection, so seeds
    are distinct for every ``b`` in ``[1, 2**64)``.
    """
    if b < 1:
        raise ValidationError(f"replicate index must be >= 1, got {b}")
    z = (int(master_seed) + int(b) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class ResamplingPlan:
    scheme: Scheme
    m: int
    N: int
    master_seed: int = 0
    cluster_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))

    def validate(self, n):
        if self.cluster_column is not None:
            raise UnsupportedScheme(
                f"cluster column {self.cluster_column!r} declared: block/cluster resampling for "
                "dependent observations is not supported"
            )
        if self.N < 1:
            raise ValidationError(f"number of replicates N must be >= 1, got {self.N}")
        if self.m < 1:
            raise ValidationError(f"resampling size m must be >= 1, got {self.m}")
        if self.scheme is not Scheme.WITH_REPLACEMENT and self.m > n:
            raise MGreaterThanN(f"{self.scheme.value} needs m <= n, got m={self.m}, n={n}")
        return self


@dataclass(frozen=True)
class Replicate:
    b: int
    row_indices: np.ndarray
    seed: int
    complement: np.ndarray | None = None

    @property
    def m(self):
        return len(self.row_indices)


def draw_indices(scheme, n, m, seed):
    """Draw ``m`` row indices from ``range(n)``.

    ``with_replacement`` draws i.i.d. uniform indices; the other schemes take
    the first ``m`` entries of a seeded permutation.
    """
    scheme = Scheme.parse(scheme)
    if n < 1 or m < 1:
        raise ValidationError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    if scheme is Scheme.WITH_REPLACEMENT:
        return rng.integers(0, n, size=m, dtype=np.int64)
    if m > n:
        raise MGreaterThanN(f"{scheme.value} needs m <= n, got m={m}, n={n}")
    return rng.permutation(n)[:m].astype(np.int64)


def make_replicate(n, plan, b):
    seed = derive_seed(plan.master_seed, b)
    idx = draw_indices(plan.scheme, n, plan.m, seed)
    complement = None
    if plan.scheme is Scheme.SAMPLE_SPLIT:
        mask = np.ones(n, dtype=bool)
        mask[idx] = False
        complement = np.flatnonzero(mask)
    return Replicate(b=b, row_indices=idx, seed=seed, complement=complement)


def materialize(ds, rep):
    """Covariate dataset for a replicate; the outcome is deliberately dropped."""
    idx = np.asarray(rep.row_indices, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= ds.n:
        raise IndexOutOfRange(f"replicate {rep.b} has indices outside [0, {ds.n})")
    ids = [f"b{rep.b}_r{ds.row_ids[i]}" for i in idx]
    return ds.take_rows(idx, row_ids=ids, keep_y=False)


def generate_replicates(ds, plan):
    """Yield ``(Replicate, Dataset)`` for ``b = 1..N``, one at a time."""
    plan.validate(ds.n)
    for b in range(1, plan.N + 1):
        rep = make_replicate(ds.n, plan, b)
        yield rep, materialize(ds, rep)


def replicate_name(b):
    return f"b_{b:04d}"


def write_indices(out_dir, rep):
    d = ensure_dir(Path(out_dir) / "indices")
    path = d / f"{replicate_name(rep.b)}.txt"
    try:
        path.write_text("".join(f"{int(i)}\n" for i in rep.row_indices))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def read_indices(out_dir, b):
    path = Path(out_dir) / "indices" / f"{replicate_name(b)}.txt"
    if not path.is_file():
        raise MissingFile(f"missing replicate index file {path}")
    return np.array([int(s) for s in path.read_text().split()], dtype=np.int64)


def write_plasmode(out_dir, rep, ds_rep, y=None, outcome_name="y"):
    d = ensure_dir(Path(out_dir) / "plasmodes")
    if y is not None:
        ds_rep = Dataset(ds_rep.row_ids, ds_rep.column_names, ds_rep.X, y, outcome_name)
    path = d / f"{replicate_name(rep.b)}.csv"
    write_csv(ds_rep, path)
    return path
