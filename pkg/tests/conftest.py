import numpy as np
import pytest

from flfosr.data import block_starts
from flfosr.sampler import FitContext, VarianceState, precompute
from flfosr.simulate import SimulationDesign, simulate_dataset


def tiny_context(n=3, m=2, L=2, T=12, K0=3, degree=1, seed=5):
    """Small simulated instance, subject-constant covariates."""
    design = SimulationDesign(n=n, m=m, L=L, T=T, K0=K0, degree=degree, seed=seed)
    ds, truth = simulate_dataset(design)
    return ds, truth, precompute(ds, truth.basis)


def synthetic_context(K=3, m=(2, 3, 1, 2), L=1, T=8, seed=0):
    """Working-model context with moderate column scales d ~ O(1).

    Bypasses the basis so chain-level tests are free of the huge prior
    scale the penalty null space carries; covariates are subject-constant.
    """
    rng = np.random.default_rng(seed)
    m = np.asarray(m, dtype=np.int64)
    n = m.size
    M = int(m.sum())
    subject_of = np.repeat(np.arange(n), m)
    x = rng.standard_normal((n, L))
    X = np.column_stack([np.ones(M), x[subject_of]])
    d = rng.uniform(0.5, 2.0, size=K)
    yk = rng.standard_normal((K, M))
    ss_y = float(np.sum(d[:, None] * yk**2) + 5.0)
    return FitContext(
        yk=yk,
        d=d,
        X=X,
        subject_of=subject_of,
        m=m,
        starts=block_starts(m),
        ss_y=ss_y,
        T=T,
        grid=np.linspace(0.0, 1.0, T),
        covariate_names=("intercept", *[f"x{l}" for l in range(1, L + 1)]),
        basis=None,
        fingerprints={},
    )


def random_variances(rng, p, n):
    """Strictly positive variance state, moderately spread."""
    return VarianceState(
        sigma2_eps=float(rng.uniform(0.5, 2.0)),
        sigma2_alpha=rng.uniform(0.5, 2.0, size=p),
        sigma2_gamma=float(rng.uniform(0.5, 2.0)),
        sigma2_omega=rng.uniform(0.5, 2.0, size=n),
    )


@pytest.fixture
def tiny():
    ds, truth, ctx = tiny_context()
    return ds, truth, ctx


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
