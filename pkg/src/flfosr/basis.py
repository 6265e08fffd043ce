"""Penalized B-spline bases with a diagonal-Gram reparametrization.

The sampler factorizes over basis coefficients only when the evaluated
basis matrix ``B`` satisfies ``B'B = diag(d)``. Starting from standard
B-splines ``B0`` with a difference penalty ``P`` on the coefficients, the
eigendecomposition of the penalty-weighted outer product ``B0 Pr^{-1} B0'``
yields such a matrix: keeping eigenpairs ``(lam_k, u_k)`` above a relative
cutoff and setting ``B = U diag(sqrt(lam))`` gives ``B'B = diag(lam)`` while
``B B' = B0 Pr^{-1} B0'``, so iid unit-variance coefficients on the new
columns reproduce the covariance implied by the penalty prior on the old
ones.

``Pr`` is a ridge-stabilized version of ``P``: a pure pseudo-inverse would
assign zero prior variance to the penalty null space (constant and linear
coefficient profiles), removing level and trend from the function space.
The small ridge keeps those directions with a large-but-finite scale.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.interpolate import BSpline

from .errors import (
    DecompositionError,
    DegenerateBasisError,
    DimensionError,
    InvalidInputError,
    UnsupportedGridError,
)

RIDGE_EPS = 1e-8
DEFAULT_EIG_TOL = 1e-10
DEFAULT_K0 = 15
DEFAULT_DEGREE = 3
DEFAULT_PENALTY_ORDER = 2


@dataclass(frozen=True)
class RawBasis:
    """Evaluated B-spline basis plus its coefficient roughness penalty.

    ``B0`` is T x K0 with rows summing to one (partition of unity); ``P``
    is the symmetric positive-semidefinite penalty, rank K0 - order for a
    difference penalty. ``P`` is None until a penalty is attached.
    """

    grid: np.ndarray
    B0: np.ndarray
    P: np.ndarray | None
    degree: int
    K0: int
    penalty_order: int | None = None
    knots: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.B0.shape[0]


@dataclass(frozen=True)
class OrthoBasis:
    """Reparametrized basis with diagonal Gram matrix.

    ``B`` is T x K, ``B'B = diag(d)`` with ``d`` positive and stored in
    decreasing order; K <= min(T, K0) after eigenvalue truncation.
    """

    B: np.ndarray
    d: np.ndarray
    K: int
    source: RawBasis
    eig_tol: float

    @property
    def T(self) -> int:
        return self.B.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return self.source.grid


def build_bspline_basis(grid, K0: int, degree: int) -> RawBasis:
    """Evaluate K0 B-splines of the given degree on an increasing grid.

    Knots are equally spaced in the grid range with full-multiplicity
    boundary knots, so the columns form a partition of unity and interior
    rows have exactly ``degree + 1`` nonzero entries.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise InvalidInputError("grid must be one-dimensional")
    if grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidInputError("grid must be strictly increasing with at least 2 points")
    if not np.all(np.isfinite(grid)):
        raise InvalidInputError("grid contains non-finite values")
    degree = int(degree)
    K0 = int(K0)
    if degree < 0:
        raise InvalidInputError("degree must be >= 0")
    if K0 > grid.size:
        raise DimensionError(f"K0={K0} exceeds number of grid points T={grid.size}")
    if K0 < degree + 2:
        raise DimensionError(f"K0={K0} too small for degree {degree} (need K0 >= degree + 2)")

    lo, hi = grid[0], grid[-1]
    n_interior = K0 - degree - 1
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    B0 = BSpline.design_matrix(grid, knots, degree, extrapolate=False).toarray()
    return RawBasis(grid=grid, B0=B0, P=None, degree=degree, K0=K0, knots=knots)


def build_difference_penalty(K0: int, order: int) -> np.ndarray:
    """Return P = D'D where D is the order-th difference operator on K0 coefficients."""
    K0 = int(K0)
    order = int(order)
    if order < 1:
        raise InvalidInputError("penalty order must be >= 1")
    if order >= K0:
        raise DimensionError(f"penalty order {order} must be < K0={K0}")
    D = np.diff(np.eye(K0), n=order, axis=0)
    return D.T @ D


def with_difference_penalty(raw: RawBasis, order: int = DEFAULT_PENALTY_ORDER) -> RawBasis:
    """Attach a difference penalty of the given order to a raw basis."""
    return replace(raw, P=build_difference_penalty(raw.K0, order), penalty_order=int(order))


def ridged_penalty(P: np.ndarray, eps: float = RIDGE_EPS) -> np.ndarray:
    """Ridge-stabilized penalty Pr = P + eps * tr(P)/K0 * I."""
    K0 = P.shape[0]
    return P + (eps * np.trace(P) / K0) * np.eye(K0)


def orthogonalize(raw: RawBasis, eig_tol: float = DEFAULT_EIG_TOL) -> OrthoBasis:
    """Reparametrize a penalized basis so its Gram matrix is diagonal.

    Eigendecomposes ``C = B0 Pr^{-1} B0'`` and keeps eigenpairs with
    ``lam > eig_tol * lam_max``; returns ``B = U+ sqrt(Lam+)`` and
    ``d = Lam+`` in decreasing order.
    """
    if raw.P is None:
        raise InvalidInputError("raw basis has no penalty attached")
    if not (0.0 < eig_tol < 1.0):
        raise InvalidInputError("eig_tol must lie in (0, 1)")
    Pr = ridged_penalty(raw.P)
    C = raw.B0 @ scipy.linalg.solve(Pr, raw.B0.T, assume_a="pos")
    C = 0.5 * (C + C.T)
    lam, U = np.linalg.eigh(C)
    lam_max = lam[-1]
    if not np.isfinite(lam_max) or lam_max <= 0:
        raise DegenerateBasisError("penalized outer product has no positive eigenvalues")
    if lam[0] < -1e-8 * lam_max:
        raise DecompositionError(
            f"penalized outer product is not PSD within tolerance (lam_min={lam[0]:.3e})"
        )
    keep = lam > eig_tol * lam_max
    if not np.any(keep):
        raise DegenerateBasisError("all eigenvalues fell below the truncation cutoff")
    # eigh returns ascending order; flip so k=0 is the dominant direction
    d = lam[keep][::-1].copy()
    U = U[:, keep][:, ::-1]
    # canonical sign: largest-magnitude entry of each eigenvector positive
    signs = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    B = U * np.sqrt(d)
    return OrthoBasis(B=B, d=d, K=int(d.size), source=raw, eig_tol=float(eig_tol))


def make_basis(
    grid,
    K0: int = DEFAULT_K0,
    degree: int = DEFAULT_DEGREE,
    penalty_order: int = DEFAULT_PENALTY_ORDER,
    eig_tol: float = DEFAULT_EIG_TOL,
) -> OrthoBasis:
    """Build, penalize and orthogonalize a B-spline basis in one call."""
    raw = with_difference_penalty(build_bspline_basis(grid, K0, degree), penalty_order)
    return orthogonalize(raw, eig_tol)


def project(basis: OrthoBasis, Y) -> np.ndarray:
    """Project curves onto the basis: ``diag(d)^{-1} B' Y``.

    ``Y`` is a T-vector or a T x M matrix of curves stored columnwise; the
    result has K rows. This is the only place the sampler touches
    T-dimensional data, and it runs once before MCMC.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != basis.T:
        raise DimensionError(f"Y has {Y.shape[0]} rows, basis expects {basis.T}")
    out = basis.B.T @ Y
    if out.ndim == 1:
        return out / basis.d
    return out / basis.d[:, None]


def raw_coefficient_map(basis: OrthoBasis) -> np.ndarray:
    """K0 x K matrix A with ``B = B0 A``, valid on and off the grid.

    Lets the orthogonalized basis be re-evaluated anywhere the raw
    B-splines can be: ``B(tau) = B0(tau) A``.
    """
    raw = basis.source
    if raw.P is None:
        raise UnsupportedGridError("source basis has no penalty; cannot re-evaluate")
    Pr = ridged_penalty(raw.P)
    return scipy.linalg.solve(Pr, raw.B0.T @ (basis.B / basis.d), assume_a="pos")


def evaluate_basis(basis: OrthoBasis, grid_out) -> np.ndarray:
    """Evaluate the orthogonalized basis columns on a new grid."""
    raw = basis.source
    grid_out = np.asarray(grid_out, dtype=float)
    if grid_out.ndim != 1:
        raise InvalidInputError("grid_out must be one-dimensional")
    if np.array_equal(grid_out, basis.grid):
        return basis.B
    if raw.knots is None or raw.P is None:
        raise UnsupportedGridError("stored basis cannot be re-evaluated off its grid")
    lo, hi = raw.grid[0], raw.grid[-1]
    if grid_out.min() < lo or grid_out.max() > hi:
        raise UnsupportedGridError("grid_out extends outside the training domain")
    B0_new = BSpline.design_matrix(grid_out, raw.knots, raw.degree, extrapolate=False).toarray()
    return B0_new @ raw_coefficient_map(basis)


def basis_fingerprint(basis: OrthoBasis) -> str:
    """SHA-256 over the byte content defining the basis."""
    h = hashlib.sha256()
    for arr in (basis.source.grid, basis.B, basis.d):
        a = np.ascontiguousarray(arr)
        h.update(a.tobytes())
        h.update(str(a.shape).encode())
    h.update(
        json.dumps(
            {
                "degree": basis.source.degree,
                "K0": basis.source.K0,
                "penalty_order": basis.source.penalty_order,
                "eig_tol": basis.eig_tol,
            },
            sort_keys=True,
        ).encode()
    )
    return h.hexdigest()


def _write_matrix_csv(path: Path, mat: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(mat):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows, dtype=float)


def save_basis(basis: OrthoBasis, directory) -> None:
    """Write the basis as a CSV pair (B, d) plus a JSON sidecar.

    The sidecar records everything needed to rebuild the basis bit-exactly
    from scratch: grid, degree, K0, penalty order and eig_tol.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix_csv(directory / "B.csv", basis.B)
    _write_matrix_csv(directory / "d.csv", basis.d[:, None])
    sidecar = {
        "grid": [repr(float(v)) for v in basis.grid],
        "degree": basis.source.degree,
        "K0": basis.source.K0,
        "penalty_order": basis.source.penalty_order,
        "eig_tol": basis.eig_tol,
    }
    with open(directory / "basis.json", "w") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")


def load_basis(directory) -> OrthoBasis:
    """Load a basis saved by :func:`save_basis`."""
    directory = Path(directory)
    with open(directory / "basis.json") as fh:
        sidecar = json.load(fh)
    grid = np.asarray([float(v) for v in sidecar["grid"]])
    raw = with_difference_penalty(
        build_bspline_basis(grid, sidecar["K0"], sidecar["degree"]),
        sidecar["penalty_order"],
    )
    B = _read_matrix_csv(directory / "B.csv")
    d = _read_matrix_csv(directory / "d.csv").ravel()
    if B.shape != (grid.size, d.size):
        raise InvalidInputError("basis files are inconsistent with the sidecar grid")
    return OrthoBasis(B=B, d=d, K=int(d.size), source=raw, eig_tol=float(sidecar["eig_tol"]))
