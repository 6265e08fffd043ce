"""Two-block Gibbs sampler for the longitudinal functional mixed model.

Each iteration draws, in order, all fixed-effect coefficients from their
marginal posterior given the variance components, all subject-level
coefficients from their partial conditional (replicate effects integrated
out), and all replicate-level coefficients from their full conditional.
That cascade is a direct draw from the joint posterior of every
coefficient given the variances, so the only Markov dependence left runs
through the variance block, which is conjugate and closed form.

The diagonal Gram matrix of the basis makes the joint posterior factorize
over basis index k: the subject- and replicate-level precisions are
elementwise scalars and the fixed-effect block is the only matrix solve.
The fixed-effect weights treat each subject's covariate rows as
exchangeable; they integrate the random effects exactly when covariates
are constant within subject (the simulator's default law).

Randomness contract: a master seed deterministically derives one
independent substream per (iteration, step, k). Output is therefore
bit-identical across serial and parallel execution and any thread count.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .basis import OrthoBasis, basis_fingerprint, evaluate_basis
from .data import (
    LongitudinalDataset,
    block_starts,
    dataset_fingerprint,
    project_dataset,
)
from .errors import (
    DimensionError,
    InvalidInputError,
    InvalidStateError,
    NumericalError,
)

PRECISION_FLOOR = 1e-12
PRECISION_CEIL = 1e12
FIXED_INTERCEPT_VARIANCE = 1e6

STEP_ALPHA, STEP_GAMMA, STEP_OMEGA, STEP_VARIANCES = 0, 1, 2, 3


@dataclass
class SamplerConfig:
    """MCMC settings; defaults mirror the reference simulation setup."""

    a: float = 0.1
    b: float = 0.1
    N: int = 1000
    N_burn: int = 1000
    thin: int = 1
    seed: int = 0
    intercept_variance_sampled: bool = True
    parallel_k: bool = False
    keep_random_effects: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise InvalidInputError("N must be >= 1")
        if self.N_burn < 0:
            raise InvalidInputError("N_burn must be >= 0")
        if self.thin < 1:
            raise InvalidInputError("thin must be >= 1")
        if not (self.a > 0 and self.b > 0):
            raise InvalidInputError("Gamma hyperparameters a, b must be > 0")
        if self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")


@dataclass
class CoefState:
    """Basis coefficients: alpha (L+1) x K, gamma n x K, omega M x K."""

    alpha: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray


@dataclass
class VarianceState:
    """Variance components; all strictly positive."""

    sigma2_eps: float
    sigma2_alpha: np.ndarray
    sigma2_gamma: float
    sigma2_omega: np.ndarray


@dataclass
class ClampCounter:
    """Counts precision draws pushed back into [1e-12, 1e12]."""

    count: int = 0


@dataclass(frozen=True)
class FitContext:
    """Everything the sampling loop needs, hoisted out of the iteration.

    yk holds the projected coefficients (K x M); ss_y is the total sum of
    squares of the raw curves, needed only by the error-variance update.
    """

    yk: np.ndarray
    d: np.ndarray
    X: np.ndarray
    subject_of: np.ndarray
    m: np.ndarray
    starts: np.ndarray
    ss_y: float
    T: int
    grid: np.ndarray
    covariate_names: tuple[str, ...]
    basis: OrthoBasis
    fingerprints: dict

    @property
    def K(self) -> int:
        return self.d.size

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.m.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.X.shape[1] - 1


@dataclass
class PosteriorDraws:
    """Retained MCMC output plus wall times and provenance metadata.

    alpha has shape (N, L+1, K); gamma/omega histories are kept only on
    request since they scale with M * K * N.
    """

    alpha: np.ndarray
    sigma2_eps: np.ndarray
    sigma2_alpha: np.ndarray
    sigma2_gamma: np.ndarray
    sigma2_omega: np.ndarray
    seconds_burn: float
    seconds_sample: float
    meta: dict
    gamma: np.ndarray | None = None
    omega: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.alpha.shape[0]


def precompute(ds: LongitudinalDataset, basis: OrthoBasis) -> FitContext:
    """Project the curves and hoist all variance-independent quantities."""
    if basis.T != ds.T or not np.array_equal(basis.grid, ds.grid):
        raise DimensionError("basis grid does not match the dataset grid")
    projected = project_dataset(ds, basis)
    return FitContext(
        yk=projected.yk,
        d=basis.d,
        X=ds.X,
        subject_of=ds.subject_of,
        m=ds.m.astype(np.int64),
        starts=block_starts(ds.m),
        ss_y=float(np.sum(ds.curves**2)),
        T=ds.T,
        grid=ds.grid,
        covariate_names=ds.covariate_names,
        basis=basis,
        fingerprints={
            "dataset": dataset_fingerprint(ds),
            "basis": basis_fingerprint(basis),
        },
    )


# ---------------------------------------------------------------------------
# Randomness plumbing
# ---------------------------------------------------------------------------


def substream(seed: int, iteration: int, step: int, k: int) -> np.random.Generator:
    """Independent generator for one (iteration, step, k) block."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, iteration, step, k)))


def step_substreams(seed: int, iteration: int, step: int, K: int) -> list[np.random.Generator]:
    return [substream(seed, iteration, step, k) for k in range(K)]


def _normals(rng, K: int, size: int) -> np.ndarray:
    """Draw a (K, size) block, either from one generator or K substreams."""
    if isinstance(rng, np.random.Generator):
        return rng.standard_normal((K, size))
    rngs = list(rng)
    if len(rngs) != K:
        raise InvalidInputError(f"need {K} per-k generators, got {len(rngs)}")
    out = np.empty((K, size))
    for k, g in enumerate(rngs):
        out[k] = g.standard_normal(size)
    return out


def _over_k(work: Callable[[slice], None], K: int, parallel: bool) -> None:
    """Run a per-k-slice worker serially or across a small thread pool.

    Workers write disjoint rows of preallocated outputs, and every k-block
    depends only on its own inputs, so chunking cannot change the result.
    """
    if not parallel or K <= 1:
        work(slice(0, K))
        return
    n_chunks = min(4, K)
    bounds = np.linspace(0, K, n_chunks + 1).astype(int)
    with ThreadPoolExecutor(max_workers=n_chunks) as pool:
        futures = [
            pool.submit(work, slice(int(lo), int(hi)))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        for f in futures:
            f.result()


# ---------------------------------------------------------------------------
# Coefficient blocks
# ---------------------------------------------------------------------------


def _check_variances(v: VarianceState) -> None:
    ok = (
        np.isfinite(v.sigma2_eps)
        and v.sigma2_eps > 0
        and np.all(np.isfinite(v.sigma2_alpha))
        and np.all(v.sigma2_alpha > 0)
        and np.isfinite(v.sigma2_gamma)
        and v.sigma2_gamma > 0
        and np.all(np.isfinite(v.sigma2_omega))
        and np.all(v.sigma2_omega > 0)
    )
    if not ok:
        raise InvalidStateError("variance state must be strictly positive and finite")


def omega_full_conditional(
    ctx: FitContext, alpha: np.ndarray, gamma: np.ndarray, variances: VarianceState
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and precision (both K x M) of the replicate-effect conditional.

    Row k has precision d_k / sigma2_eps + 1 / sigma2_omega_i and mean
    proportional to the residual after fixed and subject effects.
    """
    resid = ctx.yk - (ctx.X @ alpha).T - gamma.T[:, ctx.subject_of]
    lam = ctx.d[:, None] / variances.sigma2_eps
    prec = lam + 1.0 / variances.sigma2_omega[ctx.subject_of][None, :]
    return lam * resid / prec, prec


def sample_omega(
    ctx: FitContext,
    alpha: np.ndarray,
    gamma: np.ndarray,
    variances: VarianceState,
    rng,
    parallel: bool = False,
) -> np.ndarray:
    """Draw all replicate-level coefficients; returns M x K. Cost O(MK)."""
    _check_variances(variances)
    z = _normals(rng, ctx.K, ctx.M)
    out = np.empty((ctx.K, ctx.M))
    XaT = (ctx.X @ alpha).T
    gT = gamma.T[:, ctx.subject_of]
    sw = variances.sigma2_omega[ctx.subject_of]

    def work(ks: slice) -> None:
        lam = ctx.d[ks, None] / variances.sigma2_eps
        prec = lam + 1.0 / sw[None, :]
        mean = lam * (ctx.yk[ks] - XaT[ks] - gT[ks]) / prec
        out[ks] = mean + z[ks] / np.sqrt(prec)

    _over_k(work, ctx.K, parallel)
    return np.ascontiguousarray(out.T)


def gamma_partial_conditional(
    ctx: FitContext, alpha: np.ndarray, variances: VarianceState
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and precision (both K x n) of the subject-effect conditional
    with replicate effects integrated out."""
    resid = ctx.yk - (ctx.X @ alpha).T
    rsum = np.add.reduceat(resid, ctx.starts, axis=1)
    v = 1.0 / (variances.sigma2_eps + ctx.d[:, None] * variances.sigma2_omega[None, :])
    prec = 1.0 / variances.sigma2_gamma + ctx.d[:, None] * ctx.m[None, :] * v
    return ctx.d[:, None] * v * rsum / prec, prec


def sample_gamma(
    ctx: FitContext,
    alpha: np.ndarray,
    variances: VarianceState,
    rng,
    parallel: bool = False,
) -> np.ndarray:
    """Draw all subject-level coefficients; returns n x K.

    Marginalizes the replicate effects in closed form: each observation
    contributes noise variance sigma2_eps / d_k + sigma2_omega_i, so the
    per-subject precision is scalar. Cost O(MK) for the grouped residual
    sums plus O(nK) for the draws.
    """
    _check_variances(variances)
    z = _normals(rng, ctx.K, ctx.n)
    out = np.empty((ctx.K, ctx.n))
    resid = ctx.yk - (ctx.X @ alpha).T

    def work(ks: slice) -> None:
        rsum = np.add.reduceat(resid[ks], ctx.starts, axis=1)
        v = 1.0 / (variances.sigma2_eps + ctx.d[ks, None] * variances.sigma2_omega[None, :])
        prec = 1.0 / variances.sigma2_gamma + ctx.d[ks, None] * ctx.m[None, :] * v
        mean = ctx.d[ks, None] * v * rsum / prec
        out[ks] = mean + z[ks] / np.sqrt(prec)

    _over_k(work, ctx.K, parallel)
    return np.ascontiguousarray(out.T)


def alpha_marginal_weights(ctx: FitContext, variances: VarianceState) -> np.ndarray:
    """Per-row weights (K x M) of the fixed-effect marginal posterior.

    Row (i, j) of weight 1 / (sigma2_eps + d_k sigma2_omega_i +
    d_k m_i sigma2_gamma) integrates both random-effect layers out of the
    likelihood for subject i.
    """
    sw = variances.sigma2_omega[ctx.subject_of]
    mrow = ctx.m[ctx.subject_of]
    return 1.0 / (
        variances.sigma2_eps
        + ctx.d[:, None] * sw[None, :]
        + ctx.d[:, None] * mrow[None, :] * variances.sigma2_gamma
    )


def alpha_marginal_moments(
    ctx: FitContext, variances: VarianceState
) -> tuple[np.ndarray, np.ndarray]:
    """Precision matrices (K x p x p) and linear terms (K x p) for alpha."""
    w = alpha_marginal_weights(ctx, variances)
    XtWX = np.einsum("km,mi,mj->kij", w, ctx.X, ctx.X)
    Q = ctx.d[:, None, None] * XtWX
    Q[:, np.arange(ctx.p), np.arange(ctx.p)] += 1.0 / variances.sigma2_alpha
    ell = ctx.d[:, None] * np.einsum("km,mi->ki", w * ctx.yk, ctx.X)
    return Q, ell


def _cholesky_rows(Q: np.ndarray, k_offset: int) -> np.ndarray:
    """Batched Cholesky; on failure reports the offending k."""
    try:
        return np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        for j in range(Q.shape[0]):
            try:
                np.linalg.cholesky(Q[j])
            except np.linalg.LinAlgError:
                raise NumericalError(
                    "fixed-effect precision matrix is not positive definite",
                    k=k_offset + j,
                ) from None
        raise


def sample_alpha(
    ctx: FitContext,
    variances: VarianceState,
    rng,
    parallel: bool = False,
) -> np.ndarray:
    """Draw all fixed-effect coefficients from their marginal posterior.

    Returns (L+1) x K. Uses a Cholesky solve of the (L+1)-dimensional
    precision when L+1 <= M; otherwise the dual scheme that solves an
    M x M system instead, so cost is O(min(L, M)^2 max(L, M)) per k.
    Both schemes target the same distribution.
    """
    _check_variances(variances)
    p, M, K = ctx.p, ctx.M, ctx.K
    primal = p <= M
    z = _normals(rng, K, p if primal else p + M)
    out = np.empty((K, p))
    w = alpha_marginal_weights(ctx, variances)
    sa = variances.sigma2_alpha

    if primal:
        def work(ks: slice) -> None:
            XtWX = np.einsum("km,mi,mj->kij", w[ks], ctx.X, ctx.X)
            Q = ctx.d[ks, None, None] * XtWX
            Q[:, np.arange(p), np.arange(p)] += 1.0 / sa
            ell = ctx.d[ks, None] * np.einsum("km,mi->ki", w[ks] * ctx.yk[ks], ctx.X)
            chol = _cholesky_rows(Q, ks.start)
            mean = np.linalg.solve(Q, ell[..., None])[..., 0]
            noise = np.linalg.solve(np.transpose(chol, (0, 2, 1)), z[ks, :, None])[..., 0]
            out[ks] = mean + noise
    else:
        eye_M = np.eye(M)

        def work(ks: slice) -> None:
            for k in range(ks.start, ks.stop):
                scale = np.sqrt(ctx.d[k] * w[k])
                Phi = scale[:, None] * ctx.X
                target = scale * ctx.yk[k]
                u = np.sqrt(sa) * z[k, :p]
                v = Phi @ u + z[k, p:]
                Smat = (Phi * sa) @ Phi.T + eye_M
                try:
                    sol = np.linalg.solve(Smat, target - v)
                except np.linalg.LinAlgError:
                    raise NumericalError(
                        "dual fixed-effect system is singular", k=k
                    ) from None
                out[k] = u + sa * (Phi.T @ sol)

    _over_k(work, K, parallel)
    return np.ascontiguousarray(out.T)


# ---------------------------------------------------------------------------
# Variance block
# ---------------------------------------------------------------------------


def coefficient_fit(ctx: FitContext, coef: CoefState) -> np.ndarray:
    """Fitted working-model values (M x K): X alpha + expanded gamma + omega."""
    return ctx.X @ coef.alpha + coef.gamma[ctx.subject_of] + coef.omega


def curve_residual_ss(ctx: FitContext, coef: CoefState) -> float:
    """Total squared residual of the raw curves against the fitted basis fit.

    Expands ||Y - B beta||^2 through the diagonal Gram matrix so the
    T-dimensional curves are never touched inside the loop:
    ss_y - 2 sum_k d_k <y_k, beta_k> + sum_k d_k ||beta_k||^2.
    """
    bt = coefficient_fit(ctx, coef).T
    cross = np.einsum("km,km->k", ctx.yk, bt)
    sq = np.einsum("km,km->k", bt, bt)
    return ctx.ss_y + float(np.dot(ctx.d, sq - 2.0 * cross))


def _clamped_variance(prec_draw: float, counter: ClampCounter | None) -> float:
    if not np.isfinite(prec_draw) or prec_draw > PRECISION_CEIL:
        prec_draw = PRECISION_CEIL
        if counter is not None:
            counter.count += 1
    elif prec_draw < PRECISION_FLOOR:
        prec_draw = PRECISION_FLOOR
        if counter is not None:
            counter.count += 1
    return 1.0 / prec_draw


def _gamma_draw(rng: np.random.Generator, shape: float, rate: float) -> float:
    # Gamma(shape, rate) parameterization; rate == 0 yields +inf and is clamped
    with np.errstate(divide="ignore"):
        scale = np.inf if rate == 0.0 else 1.0 / rate
    return float(rng.gamma(shape, scale))


def variance_posterior_params(
    ctx: FitContext, coef: CoefState, a: float = 0.1, b: float = 0.1
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Gamma (shape, rate) pairs for every precision's conditional.

    The error precision has shape MT/2 and rate built from the curve-space
    residual sum; each remaining precision has shape a + count/2 and rate
    b + sum-of-squares/2.
    """
    M, T, n, K = ctx.M, ctx.T, ctx.n, ctx.K
    rss = curve_residual_ss(ctx, coef)
    if rss < -1e-8 * max(1.0, ctx.ss_y):
        raise NumericalError(f"curve residual sum of squares is negative ({rss:.3e})")
    rss = max(rss, 0.0)
    omega_ss = np.add.reduceat(np.sum(coef.omega**2, axis=1), ctx.starts)
    return {
        "eps": (np.array(M * T / 2.0), np.array(rss / 2.0)),
        "alpha": (
            np.full(ctx.p, a + K / 2.0),
            b + np.sum(coef.alpha**2, axis=1) / 2.0,
        ),
        "gamma": (
            np.array(a + n * K / 2.0),
            np.array(b + float(np.sum(coef.gamma**2)) / 2.0),
        ),
        "omega": (a + ctx.m * K / 2.0, b + omega_ss / 2.0),
    }


def sample_variances(
    ctx: FitContext,
    coef: CoefState,
    rng: np.random.Generator,
    a: float = 0.1,
    b: float = 0.1,
    intercept_variance_sampled: bool = True,
    clamp_counter: ClampCounter | None = None,
) -> VarianceState:
    """Draw all variance components from their conjugate conditionals.

    When the intercept variance is not sampled it stays fixed at 1e6.
    Precisions are clamped to [1e-12, 1e12]; clamps are counted.
    """
    if not (
        np.all(np.isfinite(coef.alpha))
        and np.all(np.isfinite(coef.gamma))
        and np.all(np.isfinite(coef.omega))
    ):
        raise InvalidStateError("coefficient state contains non-finite values")
    params = variance_posterior_params(ctx, coef, a, b)

    shape, rate = params["eps"]
    sigma2_eps = _clamped_variance(
        _gamma_draw(rng, float(shape), float(rate)), clamp_counter
    )

    shapes, rates = params["alpha"]
    sigma2_alpha = np.empty(ctx.p)
    for ell in range(ctx.p):
        if ell == 0 and not intercept_variance_sampled:
            sigma2_alpha[0] = FIXED_INTERCEPT_VARIANCE
            continue
        sigma2_alpha[ell] = _clamped_variance(
            _gamma_draw(rng, float(shapes[ell]), float(rates[ell])), clamp_counter
        )

    shape, rate = params["gamma"]
    sigma2_gamma = _clamped_variance(
        _gamma_draw(rng, float(shape), float(rate)), clamp_counter
    )

    shapes, rates = params["omega"]
    sigma2_omega = np.empty(ctx.n)
    for i in range(ctx.n):
        sigma2_omega[i] = _clamped_variance(
            _gamma_draw(rng, float(shapes[i]), float(rates[i])), clamp_counter
        )

    return VarianceState(
        sigma2_eps=sigma2_eps,
        sigma2_alpha=sigma2_alpha,
        sigma2_gamma=sigma2_gamma,
        sigma2_omega=sigma2_omega,
    )


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------


def initialize_state(ctx: FitContext, rng=None) -> tuple[CoefState, VarianceState]:
    """Deterministic starting point; consumes no randomness.

    Fixed effects start at the per-k ridge projection (X'X + I)^{-1} X' y_k,
    random effects at zero, variances at one.
    """
    A = ctx.X.T @ ctx.X + np.eye(ctx.p)
    alpha = np.linalg.solve(A, ctx.X.T @ ctx.yk.T)
    coef = CoefState(
        alpha=alpha,
        gamma=np.zeros((ctx.n, ctx.K)),
        omega=np.zeros((ctx.M, ctx.K)),
    )
    variances = VarianceState(
        sigma2_eps=1.0,
        sigma2_alpha=np.ones(ctx.p),
        sigma2_gamma=1.0,
        sigma2_omega=np.ones(ctx.n),
    )
    return coef, variances


def joint_coefficient_draw(
    ctx: FitContext,
    variances: VarianceState,
    rng_alpha,
    rng_gamma,
    rng_omega,
    parallel: bool = False,
) -> CoefState:
    """One exact draw of (alpha, gamma, omega) given the variances."""
    alpha = sample_alpha(ctx, variances, rng_alpha, parallel)
    gamma = sample_gamma(ctx, alpha, variances, rng_gamma, parallel)
    omega = sample_omega(ctx, alpha, gamma, variances, rng_omega, parallel)
    return CoefState(alpha=alpha, gamma=gamma, omega=omega)


def _flfosr_step(ctx, coef_prev, variances, iteration, config):
    return joint_coefficient_draw(
        ctx,
        variances,
        step_substreams(config.seed, iteration, STEP_ALPHA, ctx.K),
        step_substreams(config.seed, iteration, STEP_GAMMA, ctx.K),
        step_substreams(config.seed, iteration, STEP_OMEGA, ctx.K),
        parallel=config.parallel_k,
    )


def run_chain(
    ctx: FitContext,
    config: SamplerConfig,
    coef_step: Callable = _flfosr_step,
    label: str = "flfosr",
    init: tuple[CoefState, VarianceState] | None = None,
) -> PosteriorDraws:
    """Generic two-block chain driver shared by the samplers.

    Runs N_burn + N * thin iterations of coefficient step then variance
    step, retaining every thin-th post-burn-in state. Wall times around
    the burn-in and sampling phases are recorded separately.
    """
    coef, variances = init if init is not None else initialize_state(ctx)
    if not config.intercept_variance_sampled:
        variances.sigma2_alpha = variances.sigma2_alpha.copy()
        variances.sigma2_alpha[0] = FIXED_INTERCEPT_VARIANCE
    clamps = ClampCounter()

    N, N_burn, thin = config.N, config.N_burn, config.thin
    alpha_hist = np.empty((N, ctx.p, ctx.K))
    eps_hist = np.empty(N)
    sa_hist = np.empty((N, ctx.p))
    sg_hist = np.empty(N)
    so_hist = np.empty((N, ctx.n))
    gamma_hist = np.empty((N, ctx.n, ctx.K)) if config.keep_random_effects else None
    omega_hist = np.empty((N, ctx.M, ctx.K)) if config.keep_random_effects else None

    total = N_burn + N * thin
    kept = 0
    seconds_burn = 0.0
    t_phase = time.perf_counter()
    for it in range(total):
        try:
            coef = coef_step(ctx, coef, variances, it, config)
            variances = sample_variances(
                ctx,
                coef,
                substream(config.seed, it, STEP_VARIANCES, 0),
                a=config.a,
                b=config.b,
                intercept_variance_sampled=config.intercept_variance_sampled,
                clamp_counter=clamps,
            )
        except NumericalError as err:
            err.iteration = it
            raise
        if it == N_burn - 1:
            now = time.perf_counter()
            seconds_burn = now - t_phase
            t_phase = now
        if it >= N_burn and (it - N_burn + 1) % thin == 0:
            alpha_hist[kept] = coef.alpha
            eps_hist[kept] = variances.sigma2_eps
            sa_hist[kept] = variances.sigma2_alpha
            sg_hist[kept] = variances.sigma2_gamma
            so_hist[kept] = variances.sigma2_omega
            if gamma_hist is not None:
                gamma_hist[kept] = coef.gamma
                omega_hist[kept] = coef.omega
            kept += 1
    seconds_sample = time.perf_counter() - t_phase
    if N_burn == 0:
        seconds_burn = 0.0

    meta = {
        "sampler": label,
        "config": asdict(config),
        "seed": config.seed,
        "fingerprints": dict(ctx.fingerprints),
        "clamp_events": clamps.count,
        "covariate_names": list(ctx.covariate_names),
        "dims": {"K": ctx.K, "T": ctx.T, "M": ctx.M, "n": ctx.n, "L": ctx.L},
        "grid": [float(v) for v in ctx.grid],
    }
    return PosteriorDraws(
        alpha=alpha_hist,
        sigma2_eps=eps_hist,
        sigma2_alpha=sa_hist,
        sigma2_gamma=sg_hist,
        sigma2_omega=so_hist,
        seconds_burn=float(seconds_burn),
        seconds_sample=float(seconds_sample),
        meta=meta,
        gamma=gamma_hist,
        omega=omega_hist,
    )


def run_gibbs(
    ctx: FitContext,
    config: SamplerConfig,
    init: tuple[CoefState, VarianceState] | None = None,
) -> PosteriorDraws:
    """Run the joint-block sampler: alpha, gamma, omega, then variances."""
    return run_chain(ctx, config, _flfosr_step, "flfosr", init)


def reconstruct_effects(
    draws: PosteriorDraws,
    basis: OrthoBasis,
    grid_out=None,
    which: str = "alpha",
) -> np.ndarray:
    """Turn retained coefficient draws into evaluated effect functions.

    For alpha the result has shape (N, L+1, T_out); gamma and omega
    require their histories to have been retained.
    """
    B = basis.B if grid_out is None else evaluate_basis(basis, grid_out)
    if which == "alpha":
        coef = draws.alpha
    elif which == "gamma":
        coef = draws.gamma
    elif which == "omega":
        coef = draws.omega
    else:
        raise InvalidInputError(f"unknown effect family: {which!r}")
    if coef is None:
        raise InvalidInputError(f"{which} history was not retained in these draws")
    if coef.shape[-1] != B.shape[1]:
        raise DimensionError("draw dimension does not match the basis")
    return np.einsum("npk,tk->npt", coef, B)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _write_history_csv(path: Path, header: list[str], rows: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_draws(draws: PosteriorDraws, directory) -> None:
    """Persist draws as a directory of CSVs plus meta.json.

    variances.csv has one row per draw; alpha_k.csv flattens each
    (L+1) x K draw row-major (column ``alpha_<l>_<k>``, zero-based).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    N = draws.N
    p = draws.alpha.shape[1]
    K = draws.alpha.shape[2]
    n = draws.sigma2_omega.shape[1]

    var_header = (
        ["sigma2_eps"]
        + [f"sigma2_alpha_{l}" for l in range(p)]
        + ["sigma2_gamma"]
        + [f"sigma2_omega_{i}" for i in range(n)]
    )
    var_rows = np.column_stack(
        [draws.sigma2_eps, draws.sigma2_alpha, draws.sigma2_gamma, draws.sigma2_omega]
    )
    _write_history_csv(directory / "variances.csv", var_header, var_rows)

    alpha_header = [f"alpha_{l}_{k}" for l in range(p) for k in range(K)]
    _write_history_csv(directory / "alpha_k.csv", alpha_header, draws.alpha.reshape(N, p * K))

    if draws.gamma is not None:
        g_header = [f"gamma_{i}_{k}" for i in range(draws.gamma.shape[1]) for k in range(K)]
        _write_history_csv(directory / "gamma.csv", g_header, draws.gamma.reshape(N, -1))
    if draws.omega is not None:
        o_header = [f"omega_{r}_{k}" for r in range(draws.omega.shape[1]) for k in range(K)]
        _write_history_csv(directory / "omega.csv", o_header, draws.omega.reshape(N, -1))

    meta = dict(draws.meta)
    meta["timings"] = {
        "seconds_burn": draws.seconds_burn,
        "seconds_sample": draws.seconds_sample,
    }
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_history_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.asarray(rows, dtype=float)


def load_draws(directory) -> PosteriorDraws:
    """Load draws persisted by :func:`save_draws`."""
    directory = Path(directory)
    if not (directory / "meta.json").exists():
        raise InvalidInputError(f"draws directory missing meta.json: {directory}")
    with open(directory / "meta.json") as fh:
        meta = json.load(fh)
    dims = meta["dims"]
    p, K, n = dims["L"] + 1, dims["K"], dims["n"]
    _, var_rows = _read_history_csv(directory / "variances.csv")
    _, alpha_rows = _read_history_csv(directory / "alpha_k.csv")
    N = alpha_rows.shape[0]
    gamma = omega = None
    if (directory / "gamma.csv").exists():
        _, g = _read_history_csv(directory / "gamma.csv")
        gamma = g.reshape(N, n, K)
    if (directory / "omega.csv").exists():
        _, o = _read_history_csv(directory / "omega.csv")
        omega = o.reshape(N, dims["M"], K)
    timings = meta.pop("timings", {})
    return PosteriorDraws(
        alpha=alpha_rows.reshape(N, p, K),
        sigma2_eps=var_rows[:, 0],
        sigma2_alpha=var_rows[:, 1 : 1 + p],
        sigma2_gamma=var_rows[:, 1 + p],
        sigma2_omega=var_rows[:, 2 + p :],
        seconds_burn=float(timings.get("seconds_burn", 0.0)),
        seconds_sample=float(timings.get("seconds_sample", 0.0)),
        meta=meta,
        gamma=gamma,
        omega=omega,
    )


def hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
