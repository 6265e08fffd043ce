"""Synthetic longitudinal functional datasets at desk scale.

Coefficients for every effect layer are drawn iid Gaussian on the same
orthogonalized basis the fitter uses (a flag switches generation to the
raw B-splines to probe robustness), the intercept coefficients are pinned
at one, and white noise is added on the observation grid. Covariates are
standard normal and constant within subject by default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .basis import OrthoBasis, make_basis
from .data import LongitudinalDataset, from_arrays, write_dataset
from .errors import InvalidInputError

COVARIATE_LAWS = ("subject_normal", "replicate_normal")


@dataclass(frozen=True)
class SimulationDesign:
    """Size and variance knobs for one synthetic dataset."""

    n: int = 20
    m: int = 5
    L: int = 5
    T: int = 144
    K0: int = 15
    degree: int = 3
    penalty_order: int = 2
    eig_tol: float = 1e-10
    sigma2_alpha: float = 1.0
    sigma2_gamma: float = 1.0
    sigma2_omega: float = 1.0
    sigma2_eps: float = 10.0
    covariate_law: str = "subject_normal"
    generate_on_raw_basis: bool = False
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.m, self.T, self.K0) < 1 or self.L < 0:
            raise InvalidInputError("counts must be >= 1 (L may be 0)")
        for name in ("sigma2_alpha", "sigma2_gamma", "sigma2_omega", "sigma2_eps"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be > 0")
        if self.covariate_law not in COVARIATE_LAWS:
            raise InvalidInputError(f"covariate_law must be one of {COVARIATE_LAWS}")
        if self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")


@dataclass(frozen=True)
class SimulatedTruth:
    """Generating coefficients, their evaluated effect functions and noise."""

    alpha: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    alpha_functions: np.ndarray
    basis: OrthoBasis
    noise: np.ndarray
    generated_on_raw: bool = False


def simulate_dataset(design: SimulationDesign) -> tuple[LongitudinalDataset, SimulatedTruth]:
    """Generate one dataset plus the truth that produced it.

    Deterministic given the seed: the generator draws covariates, then the
    three coefficient layers, then the observation noise, in that order.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(design.seed,)))
    grid = np.linspace(0.0, 1.0, design.T)
    basis = make_basis(
        grid,
        K0=design.K0,
        degree=design.degree,
        penalty_order=design.penalty_order,
        eig_tol=design.eig_tol,
    )
    eval_matrix = basis.source.B0 if design.generate_on_raw_basis else basis.B
    K = eval_matrix.shape[1]
    n, m, L = design.n, design.m, design.L
    M = n * m

    if design.covariate_law == "subject_normal":
        x_subj = rng.standard_normal((n, L))
        covariates = np.repeat(x_subj, m, axis=0)
    else:
        covariates = rng.standard_normal((M, L))

    alpha = np.empty((L + 1, K))
    alpha[0] = 1.0
    alpha[1:] = rng.normal(0.0, np.sqrt(design.sigma2_alpha), size=(L, K))
    gamma = rng.normal(0.0, np.sqrt(design.sigma2_gamma), size=(n, K))
    omega = rng.normal(0.0, np.sqrt(design.sigma2_omega), size=(M, K))

    subject_of = np.repeat(np.arange(n), m)
    X = np.column_stack([np.ones(M), covariates])
    beta = X @ alpha + gamma[subject_of] + omega
    noise = rng.normal(0.0, np.sqrt(design.sigma2_eps), size=(M, design.T))
    curves = beta @ eval_matrix.T + noise

    ds = from_arrays(
        grid,
        curves,
        list(subject_of),
        list(range(M)),
        covariates,
        [f"x{l}" for l in range(1, L + 1)],
    )
    truth = SimulatedTruth(
        alpha=alpha,
        gamma=gamma,
        omega=omega,
        alpha_functions=(eval_matrix @ alpha.T).T,
        basis=basis,
        noise=noise,
        generated_on_raw=design.generate_on_raw_basis,
    )
    return ds, truth


def write_simulation(
    directory, ds: LongitudinalDataset, truth: SimulatedTruth, design: SimulationDesign
) -> None:
    """Emit the dataset CSVs plus truth.csv and design.json."""
    directory = Path(directory)
    write_dataset(ds, directory)
    with open(directory / "truth.csv", "w") as fh:
        fh.write("covariate,t,tau,value\n")
        names = ["intercept"] + [f"x{l}" for l in range(1, truth.alpha.shape[0])]
        for l, name in enumerate(names):
            for t in range(ds.T):
                fh.write(
                    f"{name},{t},{ds.grid[t]!r},{float(truth.alpha_functions[l, t])!r}\n"
                )
    with open(directory / "design.json", "w") as fh:
        json.dump(asdict(design), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_design(path) -> SimulationDesign:
    with open(path) as fh:
        return SimulationDesign(**json.load(fh))
