"""Longitudinal functional datasets and their design structures.

Curves share one observation grid and are grouped by subject; the
subject-grouping design matrix (block diagonal of ones-vectors) is never
materialized. Its products reduce to :func:`group_sum` (sum rows within a
subject) and :func:`expand` (repeat a subject value across its rows), both
O(M).
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .basis import OrthoBasis, project
from .errors import DegenerateColumnError, DimensionError, InvalidInputError


@dataclass(frozen=True)
class LongitudinalDataset:
    """Replicated curves on a common grid plus per-replicate covariates.

    curves: M x T, ordered by subject then replicate.
    subject_of: length M, block-contiguous values 0..n-1.
    m: length n replicate counts.
    X: M x (L+1) design matrix, column 0 identically one.
    """

    grid: np.ndarray
    curves: np.ndarray
    subject_of: np.ndarray
    m: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...]
    subject_ids: tuple = ()
    replicate_ids: tuple = ()

    def __post_init__(self):
        _validate_dataset(self)

    @property
    def T(self) -> int:
        return self.grid.size

    @property
    def M(self) -> int:
        return self.curves.shape[0]

    @property
    def n(self) -> int:
        return self.m.size

    @property
    def L(self) -> int:
        return self.X.shape[1] - 1


@dataclass(frozen=True)
class ProjectedData:
    """Basis-projected coefficients for every curve: yk is K x M."""

    yk: np.ndarray
    basis: OrthoBasis


@dataclass(frozen=True)
class StandardizationInfo:
    """Recorded transform so fitted effects can be mapped back."""

    columns: tuple[int, ...]
    means: np.ndarray
    scales: np.ndarray


def _validate_dataset(ds: LongitudinalDataset) -> None:
    if ds.curves.ndim != 2 or ds.curves.shape[1] != ds.grid.size:
        raise DimensionError("curves must be M x T with T matching the grid")
    M = ds.curves.shape[0]
    if ds.subject_of.shape != (M,):
        raise DimensionError("subject_of must have one entry per curve")
    if ds.X.shape[0] != M or ds.X.ndim != 2:
        raise DimensionError("X must be M x (L+1)")
    if len(ds.covariate_names) != ds.X.shape[1]:
        raise DimensionError("covariate_names must match X columns")
    if int(ds.m.sum()) != M or np.any(ds.m < 1):
        raise InvalidInputError("replicate counts must be >= 1 and sum to M")
    if np.any(np.diff(ds.subject_of) < 0):
        raise InvalidInputError("subject_of must be nondecreasing (blocks contiguous)")
    expected = np.repeat(np.arange(ds.m.size), ds.m)
    if not np.array_equal(ds.subject_of, expected):
        raise InvalidInputError("subject_of blocks do not match replicate counts")
    if not np.all(np.isfinite(ds.curves)):
        raise InvalidInputError("curves contain missing or non-finite values")
    if not np.all(np.isfinite(ds.X)):
        raise InvalidInputError("covariates contain missing or non-finite values")
    if not np.all(ds.X[:, 0] == 1.0):
        raise InvalidInputError("X column 0 must be identically 1 (intercept)")


def _sort_key(label):
    # numeric labels sort numerically, everything else lexicographically
    try:
        return (0, float(label), "")
    except (TypeError, ValueError):
        return (1, 0.0, str(label))


def from_arrays(
    grid,
    curves,
    subject_labels,
    replicate_labels,
    covariates,
    covariate_names,
) -> LongitudinalDataset:
    """Assemble a dataset, canonicalizing row order by (subject, replicate).

    ``covariates`` is M x L without the intercept column; it is prepended
    here. Rows are stably sorted by subject label then replicate label so
    subject blocks are contiguous.
    """
    grid = np.asarray(grid, dtype=float)
    curves = np.asarray(curves, dtype=float)
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 1:
        covariates = covariates[:, None]
    M = curves.shape[0]
    if len(subject_labels) != M or len(replicate_labels) != M:
        raise DimensionError("labels must have one entry per curve")
    if covariates.shape[0] != M:
        raise DimensionError("covariates must have one row per curve")

    order = sorted(
        range(M),
        key=lambda r: (_sort_key(subject_labels[r]), _sort_key(replicate_labels[r])),
    )
    subj_sorted = [subject_labels[r] for r in order]
    uniq = []
    for s in subj_sorted:
        if not uniq or uniq[-1] != s:
            uniq.append(s)
    index_of = {s: i for i, s in enumerate(uniq)}
    subject_of = np.asarray([index_of[s] for s in subj_sorted], dtype=np.int64)
    m = np.bincount(subject_of, minlength=len(uniq)).astype(np.int64)

    X = np.column_stack([np.ones(M), covariates[order]])
    names = ("intercept", *map(str, covariate_names))
    return LongitudinalDataset(
        grid=grid,
        curves=curves[order],
        subject_of=subject_of,
        m=m,
        X=X,
        covariate_names=names,
        subject_ids=tuple(uniq),
        replicate_ids=tuple(replicate_labels[r] for r in order),
    )


def block_starts(m: np.ndarray) -> np.ndarray:
    """Row offsets at which each subject's block begins."""
    starts = np.zeros(m.size, dtype=np.intp)
    np.cumsum(m[:-1], out=starts[1:])
    return starts


def group_sum(v, subject_of) -> np.ndarray:
    """Sum entries over the rows of each subject: adjoint of :func:`expand`.

    Accepts a length-M vector or an array whose last axis has length M.
    """
    v = np.asarray(v, dtype=float)
    subject_of = np.asarray(subject_of)
    if v.shape[-1] != subject_of.size:
        raise DimensionError("last axis of v must match subject_of")
    n = int(subject_of[-1]) + 1 if subject_of.size else 0
    m = np.bincount(subject_of, minlength=n)
    return np.add.reduceat(v, block_starts(m), axis=-1)


def expand(u, subject_of) -> np.ndarray:
    """Repeat each subject's value across that subject's rows."""
    u = np.asarray(u, dtype=float)
    subject_of = np.asarray(subject_of)
    n = int(subject_of[-1]) + 1 if subject_of.size else 0
    if u.shape[-1] != n:
        raise DimensionError("last axis of u must match the number of subjects")
    return u[..., subject_of]


def dense_grouping_matrix(m: np.ndarray) -> np.ndarray:
    """Materialized block-diagonal grouping matrix; for tests and oracles only."""
    M = int(m.sum())
    Z = np.zeros((M, m.size))
    Z[np.arange(M), np.repeat(np.arange(m.size), m)] = 1.0
    return Z


def _resolve_columns(ds: LongitudinalDataset, which) -> tuple[int, ...]:
    cols = []
    for c in which:
        if isinstance(c, str):
            if c not in ds.covariate_names:
                raise InvalidInputError(f"unknown covariate name: {c}")
            c = ds.covariate_names.index(c)
        c = int(c)
        if c <= 0 or c >= ds.X.shape[1]:
            raise InvalidInputError(f"column index {c} out of range (intercept excluded)")
        cols.append(c)
    return tuple(cols)


def standardize_covariates(
    ds: LongitudinalDataset, which
) -> tuple[LongitudinalDataset, StandardizationInfo]:
    """Center selected covariate columns to mean 0 and scale to sd 1.

    Uses the sample standard deviation (denominator M - 1). Constant
    columns cannot be standardized.
    """
    cols = _resolve_columns(ds, which)
    X = ds.X.copy()
    means = np.empty(len(cols))
    scales = np.empty(len(cols))
    for j, c in enumerate(cols):
        col = X[:, c]
        mu = col.mean()
        sd = col.std(ddof=1)
        if sd == 0.0 or not np.isfinite(sd):
            raise DegenerateColumnError(
                f"covariate {ds.covariate_names[c]!r} is constant; cannot standardize"
            )
        X[:, c] = (col - mu) / sd
        means[j] = mu
        scales[j] = sd
    return replace(ds, X=X), StandardizationInfo(columns=cols, means=means, scales=scales)


def destandardize_covariates(
    ds: LongitudinalDataset, info: StandardizationInfo
) -> LongitudinalDataset:
    """Invert :func:`standardize_covariates`."""
    X = ds.X.copy()
    for j, c in enumerate(info.columns):
        X[:, c] = X[:, c] * info.scales[j] + info.means[j]
    return replace(ds, X=X)


def project_dataset(ds: LongitudinalDataset, basis: OrthoBasis) -> ProjectedData:
    """Project every curve onto the basis (one-time cost before MCMC)."""
    if basis.T != ds.T:
        raise DimensionError("basis and dataset grids have different lengths")
    return ProjectedData(yk=project(basis, ds.curves.T), basis=basis)


def dataset_fingerprint(ds: LongitudinalDataset) -> str:
    """SHA-256 over the dataset's defining bytes."""
    h = hashlib.sha256()
    for arr in (ds.grid, ds.curves, ds.subject_of, ds.m, ds.X):
        a = np.ascontiguousarray(arr)
        h.update(a.tobytes())
        h.update(str(a.shape).encode())
    h.update("\x1f".join(ds.covariate_names).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

CURVES_HEADER = ["subject_id", "replicate_id", "time_index", "value"]


def write_dataset(ds: LongitudinalDataset, directory) -> None:
    """Emit curves.csv, covariates.csv and grid.csv into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    subj = ds.subject_ids or tuple(range(ds.n))
    repl = ds.replicate_ids or tuple(range(ds.M))
    with open(directory / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVES_HEADER)
        for r in range(ds.M):
            s = subj[ds.subject_of[r]]
            for t in range(ds.T):
                w.writerow([s, repl[r], t, repr(float(ds.curves[r, t]))])
    with open(directory / "covariates.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "replicate_id", *ds.covariate_names[1:]])
        for r in range(ds.M):
            s = subj[ds.subject_of[r]]
            w.writerow([s, repl[r], *(repr(float(v)) for v in ds.X[r, 1:])])
    with open(directory / "grid.csv", "w") as fh:
        for v in ds.grid:
            fh.write(repr(float(v)) + "\n")


def load_grid(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"grid file not found: {path}")
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                vals.append(float(line))
    return np.asarray(vals, dtype=float)


def load_dataset(curves_path, covariates_path, grid_path=None) -> LongitudinalDataset:
    """Read the long-format curve file and the covariate file.

    Every (subject, replicate) pair must supply all time indices 0..T-1
    exactly once and have one covariate row; missing values are rejected.
    """
    curves_path = Path(curves_path)
    covariates_path = Path(covariates_path)
    if not curves_path.exists():
        raise InvalidInputError(f"curve file not found: {curves_path}")
    if not covariates_path.exists():
        raise InvalidInputError(f"covariate file not found: {covariates_path}")

    values: dict[tuple[str, str], dict[int, float]] = {}
    with open(curves_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CURVES_HEADER:
            raise InvalidInputError(f"curve file must have header {','.join(CURVES_HEADER)}")
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise InvalidInputError(f"malformed curve row: {row!r}")
            key = (row[0], row[1])
            t = int(row[2])
            v = float(row[3])
            if not np.isfinite(v):
                raise InvalidInputError(f"non-finite curve value for {key} at t={t}")
            values.setdefault(key, {})
            if t in values[key]:
                raise InvalidInputError(f"duplicate time_index {t} for {key}")
            values[key][t] = v
    if not values:
        raise InvalidInputError("curve file contains no data rows")

    if grid_path is not None:
        grid = load_grid(grid_path)
        T = grid.size
    else:
        T = max(max(d) for d in values.values()) + 1
        grid = np.linspace(0.0, 1.0, T)

    keys = list(values)
    M = len(keys)
    curves = np.empty((M, T))
    for r, key in enumerate(keys):
        d = values[key]
        if len(d) != T or set(d) != set(range(T)):
            raise InvalidInputError(f"curve {key} does not cover time indices 0..{T - 1}")
        curves[r] = [d[t] for t in range(T)]

    with open(covariates_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip() != "subject_id" or header[1].strip() != "replicate_id":
            raise InvalidInputError("covariate file must start with subject_id,replicate_id")
        names = [h.strip() for h in header[2:]]
        cov_rows: dict[tuple[str, str], list[float]] = {}
        for row in reader:
            if not row:
                continue
            key = (row[0], row[1])
            if key in cov_rows:
                raise InvalidInputError(f"duplicate covariate row for {key}")
            cov_rows[key] = [float(v) for v in row[2:]]
            if len(cov_rows[key]) != len(names):
                raise InvalidInputError(f"covariate row for {key} has wrong width")

    missing = [k for k in keys if k not in cov_rows]
    if missing:
        raise InvalidInputError(f"covariate rows missing for curves: {missing[:5]}")
    covariates = np.asarray([cov_rows[k] for k in keys], dtype=float)
    if not np.all(np.isfinite(covariates)):
        raise InvalidInputError("covariates contain missing or non-finite values")

    return from_arrays(
        grid,
        curves,
        [k[0] for k in keys],
        [k[1] for k in keys],
        covariates,
        names,
    )
