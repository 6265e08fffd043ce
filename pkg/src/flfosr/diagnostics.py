"""MCMC efficiency and accuracy metrics over retained draws.

Effective sample sizes use the autocorrelation-sum estimator with the
initial-positive-sequence truncation (sums of adjacent autocorrelation
pairs are kept while positive), computed directly without FFTs since the
chains here are short. Efficiency and accuracy summaries average over the
slope coefficient functions only; the intercept appears in the posterior
summary table but not in the aggregate metrics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import OrthoBasis
from .errors import DimensionError, InvalidInputError
from .sampler import PosteriorDraws, reconstruct_effects
from .simulate import SimulatedTruth

ESS_SLACK = 0.25
QUANTILE_RULE = "linear interpolation of order statistics (type 7)"


@dataclass(frozen=True)
class EfficiencyReport:
    """Per-point effective sample sizes and their aggregates.

    n_eff has shape (L, T) over slope functions; releff is the mean of
    n_eff / N; s1000 is the mean wall time to reach 1000 effective draws,
    burn-in included.
    """

    n_eff: np.ndarray
    releff: float
    s1000: float
    N: int
    covariate_names: tuple[str, ...]
    degenerate: np.ndarray


@dataclass(frozen=True)
class AccuracyReport:
    """Point and interval accuracy of the slope functions against truth."""

    rmse: float
    mciw: float
    ecp: float
    mean: np.ndarray
    q025: np.ndarray
    q975: np.ndarray


def ess_info(chain) -> tuple[float, bool]:
    """Effective sample size plus a flag marking degenerate chains.

    N / (1 + 2 * sum of autocorrelations), truncated where adjacent
    autocorrelation pairs stop being positive, clamped to (0, 1.25 N].
    A constant chain returns N by convention, flagged.
    """
    chain = np.asarray(chain, dtype=float).ravel()
    N = chain.size
    if N < 10:
        raise InvalidInputError("chain too short for an ESS estimate (need N >= 10)")
    if np.ptp(chain) == 0.0:
        return float(N), True
    x = chain - chain.mean()
    c0 = float(np.dot(x, x)) / N
    if c0 == 0.0 or not np.isfinite(c0):
        return float(N), True

    def rho(s):
        return float(np.dot(x[: N - s], x[s:])) / (N * c0)

    # pair sums Gamma_j = rho(2j) + rho(2j+1); keep while positive
    tau = -1.0
    j = 0
    while 2 * j + 1 < N:
        g = rho(2 * j) + rho(2 * j + 1)
        if g <= 0.0:
            break
        tau += 2.0 * g
        j += 1
    tau = max(tau, 1.0 / (1.0 + ESS_SLACK))
    return float(min(N / tau, N * (1.0 + ESS_SLACK))), False


def ess(chain) -> float:
    """Effective sample size of a scalar chain."""
    return ess_info(chain)[0]


def time_to_1000_effective(n_eff, seconds_burn: float, seconds_sample: float) -> float:
    """Mean over chains of seconds_burn + seconds_sample * 1000 / N_eff."""
    n_eff = np.asarray(n_eff, dtype=float)
    return float(np.mean(seconds_burn + seconds_sample * 1000.0 / n_eff))


def coverage_and_width(true_values, q025, q975) -> tuple[float, float]:
    """Empirical coverage probability and mean interval width.

    Coverage is the fraction of points whose truth lies inside the
    pointwise interval, so it is always a multiple of 1 / #points.
    """
    true_values = np.asarray(true_values, dtype=float)
    q025 = np.asarray(q025, dtype=float)
    q975 = np.asarray(q975, dtype=float)
    ecp = float(np.mean((q025 <= true_values) & (true_values <= q975)))
    mciw = float(np.mean(q975 - q025))
    return ecp, mciw


def efficiency_report(draws: PosteriorDraws, basis: OrthoBasis) -> EfficiencyReport:
    """ESS of every slope function chain plus the two aggregates.

    releff = mean over (l, t) of N_eff / N; s1000 = mean over (l, t) of
    seconds_burn + seconds_sample * 1000 / N_eff.
    """
    if draws.alpha is None or draws.alpha.size == 0:
        raise InvalidInputError("draws carry no fixed-effect history")
    funcs = reconstruct_effects(draws, basis)
    N, p, T = funcs.shape
    L = p - 1
    n_eff = np.empty((L, T))
    degenerate = np.zeros((L, T), dtype=bool)
    for l in range(L):
        for t in range(T):
            n_eff[l, t], degenerate[l, t] = ess_info(funcs[:, l + 1, t])
    if L == 0:
        releff = float("nan")
        s1000 = float("nan")
    else:
        releff = float(np.mean(n_eff) / N)
        s1000 = time_to_1000_effective(n_eff, draws.seconds_burn, draws.seconds_sample)
    names = tuple(draws.meta.get("covariate_names", [])[1:]) or tuple(
        f"x{l}" for l in range(1, p)
    )
    return EfficiencyReport(
        n_eff=n_eff,
        releff=releff,
        s1000=s1000,
        N=N,
        covariate_names=names,
        degenerate=degenerate,
    )


def accuracy_report(draws: PosteriorDraws, truth: SimulatedTruth) -> AccuracyReport:
    """RMSE, mean 95% interval width and empirical coverage for the slopes."""
    basis = truth.basis
    grid_meta = np.asarray(draws.meta.get("grid", basis.grid), dtype=float)
    if grid_meta.size != basis.grid.size or not np.allclose(grid_meta, basis.grid):
        raise InvalidInputError("truth grid does not match the grid the draws were fit on")
    funcs = reconstruct_effects(draws, basis)
    if truth.alpha_functions.shape[0] != funcs.shape[1]:
        raise DimensionError("truth and draws disagree on the number of covariates")
    slopes = funcs[:, 1:, :]
    true_slopes = truth.alpha_functions[1:, :]
    mean = slopes.mean(axis=0)
    q025 = np.quantile(slopes, 0.025, axis=0)
    q975 = np.quantile(slopes, 0.975, axis=0)
    rmse = float(np.sqrt(np.mean((mean - true_slopes) ** 2)))
    ecp, mciw = coverage_and_width(true_slopes, q025, q975)
    return AccuracyReport(rmse=rmse, mciw=mciw, ecp=ecp, mean=mean, q025=q025, q975=q975)


def summarize(draws: PosteriorDraws, basis: OrthoBasis) -> dict[str, np.ndarray]:
    """Posterior mean and 95% band of every effect function, intercept included.

    Returns parallel columns: covariate, t, tau, mean, q025, q975.
    """
    funcs = reconstruct_effects(draws, basis)
    _, p, T = funcs.shape
    names = list(draws.meta.get("covariate_names", []))
    if len(names) != p:
        names = ["intercept"] + [f"x{l}" for l in range(1, p)]
    grid = np.asarray(draws.meta.get("grid", basis.grid), dtype=float)
    mean = funcs.mean(axis=0)
    q025 = np.quantile(funcs, 0.025, axis=0)
    q975 = np.quantile(funcs, 0.975, axis=0)
    return {
        "covariate": np.repeat(np.asarray(names, dtype=object), T),
        "t": np.tile(np.arange(T), p),
        "tau": np.tile(grid, p),
        "mean": mean.reshape(-1),
        "q025": q025.reshape(-1),
        "q975": q975.reshape(-1),
    }


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def write_summary_csv(path, table: dict[str, np.ndarray]) -> None:
    cols = ["covariate", "t", "tau", "mean", "q025", "q975"]
    rows = len(table["t"])
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in range(rows):
            fh.write(
                f"{table['covariate'][r]},{int(table['t'][r])},{table['tau'][r]!r},"
                f"{table['mean'][r]!r},{table['q025'][r]!r},{table['q975'][r]!r}\n"
            )


def write_efficiency_csv(path, report: EfficiencyReport, grid) -> None:
    grid = np.asarray(grid, dtype=float)
    with open(path, "w") as fh:
        fh.write("covariate,t,tau,n_eff\n")
        L, T = report.n_eff.shape
        for l in range(L):
            name = report.covariate_names[l] if l < len(report.covariate_names) else f"x{l + 1}"
            for t in range(T):
                fh.write(f"{name},{t},{grid[t]!r},{report.n_eff[l, t]!r}\n")


def write_accuracy_csv(path, report: AccuracyReport, grid, names) -> None:
    grid = np.asarray(grid, dtype=float)
    with open(path, "w") as fh:
        fh.write("covariate,t,tau,mean,q025,q975\n")
        L, T = report.mean.shape
        for l in range(L):
            for t in range(T):
                fh.write(
                    f"{names[l]},{t},{grid[t]!r},{report.mean[l, t]!r},"
                    f"{report.q025[l, t]!r},{report.q975[l, t]!r}\n"
                )


def write_report_json(
    path,
    draws: PosteriorDraws,
    efficiency: EfficiencyReport | None = None,
    accuracy: AccuracyReport | None = None,
) -> None:
    payload = {
        "sampler": draws.meta.get("sampler"),
        "N": draws.N,
        "timings": {
            "seconds_burn": draws.seconds_burn,
            "seconds_sample": draws.seconds_sample,
        },
        "clamp_events": draws.meta.get("clamp_events"),
        "quantile_rule": QUANTILE_RULE,
    }
    if efficiency is not None:
        payload["efficiency"] = {
            "releff": efficiency.releff,
            "s1000": efficiency.s1000,
        }
    if accuracy is not None:
        payload["accuracy"] = {
            "rmse": accuracy.rmse,
            "mciw": accuracy.mciw,
            "ecp": accuracy.ecp,
        }
    with open(Path(path), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
