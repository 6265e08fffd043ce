"""Brute-force reference posteriors and a naive full-conditional sampler.

Everything here exists to check the fast sampler, not to be fast itself:
dense Gaussian algebra over the materialized design [X | Z | I_M] gives
the exact joint posterior of all coefficients at fixed variances, and
``naive_gibbs`` re-blocks the chain into the three textbook full
conditionals so the efficiency gap of that blocking can be measured.
A size guard keeps the dense constructions trivially cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import dense_grouping_matrix
from .errors import InvalidInputError, NumericalError
from .sampler import (
    STEP_ALPHA,
    STEP_GAMMA,
    STEP_OMEGA,
    CoefState,
    FitContext,
    PosteriorDraws,
    SamplerConfig,
    VarianceState,
    _normals,
    run_chain,
    sample_omega,
    step_substreams,
)

DENSE_SIZE_LIMIT = 200


@dataclass(frozen=True)
class DenseWorkingModel:
    """Materialized per-k regression: design [X | Z | I_M] plus priors."""

    design: np.ndarray
    prior_variance: np.ndarray
    noise_variance: float
    k: int


def _guard(ctx: FitContext) -> None:
    size = ctx.M + ctx.n + ctx.p
    if size > DENSE_SIZE_LIMIT:
        raise InvalidInputError(
            f"dense oracle refused: M + n + L + 1 = {size} > {DENSE_SIZE_LIMIT}"
        )


def build_dense_working_model(
    ctx: FitContext, variances: VarianceState, k: int
) -> DenseWorkingModel:
    _guard(ctx)
    Z = dense_grouping_matrix(ctx.m)
    design = np.hstack([ctx.X, Z, np.eye(ctx.M)])
    prior_variance = np.concatenate(
        [
            variances.sigma2_alpha,
            np.full(ctx.n, variances.sigma2_gamma),
            variances.sigma2_omega[ctx.subject_of],
        ]
    )
    return DenseWorkingModel(
        design=design,
        prior_variance=prior_variance,
        noise_variance=variances.sigma2_eps / ctx.d[k],
        k=int(k),
    )


def exact_joint_posterior(
    ctx: FitContext, variances: VarianceState
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact Gaussian posterior of (alpha_k, gamma_k, omega_k) per k.

    Returns a list of (mean, covariance) pairs over the stacked vector of
    length L + 1 + n + M, computed by standard conjugate algebra on the
    dense working model.
    """
    out = []
    for k in range(ctx.K):
        model = build_dense_working_model(ctx, variances, k)
        D = model.design
        Q = np.diag(1.0 / model.prior_variance) + (D.T @ D) / model.noise_variance
        cov = np.linalg.inv(Q)
        cov = 0.5 * (cov + cov.T)
        mean = cov @ (D.T @ ctx.yk[k]) / model.noise_variance
        out.append((mean, cov))
    return out


def exact_joint_posterior_from_curves(
    ds, basis, variances: VarianceState
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Same posterior, derived from the T-dimensional curve likelihood.

    Builds the full MT x K(L+1+n+M) design without any projection step,
    then reads off the per-k blocks. Agreement with
    :func:`exact_joint_posterior` confirms the projected working model is
    likelihood-equivalent.
    """
    from .sampler import precompute

    ctx = precompute(ds, basis)
    _guard(ctx)
    K, M, T, p, n = ctx.K, ctx.M, ctx.T, ctx.p, ctx.n
    block = p + n + M
    Z = dense_grouping_matrix(ctx.m)
    Dk = np.hstack([ctx.X, Z, np.eye(M)])

    G = np.zeros((M * T, K * block))
    for r in range(M):
        for k in range(K):
            G[r * T : (r + 1) * T, k * block : (k + 1) * block] += np.outer(
                basis.B[:, k], Dk[r]
            )
    y_full = ds.curves.reshape(-1)

    prior_variance = np.concatenate(
        [
            variances.sigma2_alpha,
            np.full(n, variances.sigma2_gamma),
            variances.sigma2_omega[ctx.subject_of],
        ]
    )
    prior_prec = np.tile(1.0 / prior_variance, K)
    Q = np.diag(prior_prec) + (G.T @ G) / variances.sigma2_eps
    cov = np.linalg.inv(Q)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (G.T @ y_full) / variances.sigma2_eps

    out = []
    for k in range(K):
        sl = slice(k * block, (k + 1) * block)
        out.append((mean[sl], cov[sl, sl]))
    return out


def conditional_moments(
    mean: np.ndarray, cov: np.ndarray, cond_idx, cond_values
) -> tuple[np.ndarray, np.ndarray]:
    """Moments of the remaining coordinates given a conditioned block."""
    cond_idx = np.asarray(cond_idx, dtype=int)
    rest = np.setdiff1d(np.arange(mean.size), cond_idx)
    S_rr = cov[np.ix_(rest, rest)]
    S_rc = cov[np.ix_(rest, cond_idx)]
    S_cc = cov[np.ix_(cond_idx, cond_idx)]
    adj = S_rc @ np.linalg.solve(S_cc, np.asarray(cond_values) - mean[cond_idx])
    cov_out = S_rr - S_rc @ np.linalg.solve(S_cc, S_rc.T)
    return mean[rest] + adj, 0.5 * (cov_out + cov_out.T)


def dense_marginal_variance_weights(
    ctx: FitContext, variances: VarianceState, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Dense M x M versions of the sampler's two diagonal weight structures.

    The first matrix inverts the replicate-marginalized covariance
    sigma2_eps I + d_k Sigma_omega; the second additionally integrates the
    subject effects via a rank-n correction. The second is diagonal only
    up to its action on subject-constant row vectors.
    """
    _guard(ctx)
    sw = variances.sigma2_omega[ctx.subject_of]
    V = np.linalg.inv(variances.sigma2_eps * np.eye(ctx.M) + ctx.d[k] * np.diag(sw))
    Z = dense_grouping_matrix(ctx.m)
    ZtVZ = Z.T @ V @ Z
    C = np.linalg.inv(np.eye(ctx.n) / variances.sigma2_gamma + ctx.d[k] * ZtVZ)
    W = ctx.d[k] * (V @ Z) @ C @ (Z.T @ V)
    return V, V - W


# ---------------------------------------------------------------------------
# Naive full-conditional blocking
# ---------------------------------------------------------------------------


def _alpha_full_conditional_draw(ctx, coef_prev, variances, rng):
    """[alpha | Y, gamma, omega, Sigma]: plain weighted regression per k."""
    p = ctx.p
    resid = ctx.yk - coef_prev.gamma.T[:, ctx.subject_of] - coef_prev.omega.T
    lam = ctx.d / variances.sigma2_eps
    XtX = ctx.X.T @ ctx.X
    z = _normals(rng, ctx.K, p)
    out = np.empty((ctx.K, p))
    for k in range(ctx.K):
        Q = np.diag(1.0 / variances.sigma2_alpha) + lam[k] * XtX
        ell = lam[k] * (ctx.X.T @ resid[k])
        try:
            chol = np.linalg.cholesky(Q)
        except np.linalg.LinAlgError:
            raise NumericalError(
                "full-conditional fixed-effect precision not positive definite", k=k
            ) from None
        mean = np.linalg.solve(Q, ell)
        out[k] = mean + np.linalg.solve(chol.T, z[k])
    return np.ascontiguousarray(out.T)


def _gamma_full_conditional_draw(ctx, alpha, omega, variances, rng):
    """[gamma | Y, alpha, omega, Sigma]: scalar conditionals per (k, i)."""
    resid = ctx.yk - (ctx.X @ alpha).T - omega.T
    rsum = np.add.reduceat(resid, ctx.starts, axis=1)
    lam = ctx.d[:, None] / variances.sigma2_eps
    prec = 1.0 / variances.sigma2_gamma + lam * ctx.m[None, :]
    mean = lam * rsum / prec
    z = _normals(rng, ctx.K, ctx.n)
    return np.ascontiguousarray((mean + z / np.sqrt(prec)).T)


def _naive_step(ctx, coef_prev, variances, iteration, config):
    alpha = _alpha_full_conditional_draw(
        ctx, coef_prev, variances, step_substreams(config.seed, iteration, STEP_ALPHA, ctx.K)
    )
    gamma = _gamma_full_conditional_draw(
        ctx,
        alpha,
        coef_prev.omega,
        variances,
        step_substreams(config.seed, iteration, STEP_GAMMA, ctx.K),
    )
    omega = sample_omega(
        ctx,
        alpha,
        gamma,
        variances,
        step_substreams(config.seed, iteration, STEP_OMEGA, ctx.K),
        parallel=config.parallel_k,
    )
    return CoefState(alpha=alpha, gamma=gamma, omega=omega)


def naive_gibbs(ctx: FitContext, config: SamplerConfig) -> PosteriorDraws:
    """Gibbs sampler cycling the three full conditionals.

    Same stationary distribution as the joint-block sampler (the omega
    step is shared verbatim), but alpha and gamma are updated given the
    current random effects, which couples the blocks and typically costs
    effective sample size when between-subject or between-replicate
    variance is large.
    """
    return run_chain(ctx, config, _naive_step, "naive")
