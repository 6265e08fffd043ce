"""Batch front door: simulate, fit, summarize, benchmark.

All configuration comes from flags or a JSON config file (flags win); all
outputs are files under the requested output directory. Exit codes:
0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .basis import make_basis, save_basis
from .data import load_dataset
from .errors import InvalidInputError, NumericalError
from .oracle import naive_gibbs
from .sampler import SamplerConfig, precompute, run_gibbs, save_draws, load_draws
from .simulate import SimulationDesign, simulate_dataset, write_simulation

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_FIT_DEFAULTS = {
    "K0": 15,
    "degree": 3,
    "penalty_order": 2,
    "eig_tol": 1e-10,
    "N": 1000,
    "burn": 1000,
    "thin": 1,
    "a": 0.1,
    "b": 0.1,
    "seed": 0,
    "sampler": "flfosr",
    "parallel_k": False,
    "keep_random_effects": False,
}

_SIM_DEFAULTS = {
    "n": 20,
    "m": 5,
    "L": 5,
    "T": 144,
    "sigma2_alpha": 1.0,
    "sigma2_gamma": 1.0,
    "sigma2_omega": 1.0,
    "sigma2_eps": 10.0,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flfosr")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; explicit flags override it")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)

    fitlike = argparse.ArgumentParser(add_help=False)
    fitlike.add_argument("--K0", type=int)
    fitlike.add_argument("--degree", type=int)
    fitlike.add_argument("--penalty-order", dest="penalty_order", type=int)
    fitlike.add_argument("--eig-tol", dest="eig_tol", type=float)
    fitlike.add_argument("--N", type=int)
    fitlike.add_argument("--burn", type=int)
    fitlike.add_argument("--thin", type=int)
    fitlike.add_argument("--a", type=float)
    fitlike.add_argument("--b", type=float)
    fitlike.add_argument("--sampler", choices=["flfosr", "naive"])
    fitlike.add_argument("--parallel-k", dest="parallel_k", action="store_true", default=None)
    fitlike.add_argument(
        "--keep-random-effects", dest="keep_random_effects", action="store_true", default=None
    )

    p_sim = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset")
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--m", type=int)
    p_sim.add_argument("--L", type=int)
    p_sim.add_argument("--T", type=int)
    p_sim.add_argument("--K0", type=int)
    p_sim.add_argument("--sigma2-alpha", dest="sigma2_alpha", type=float)
    p_sim.add_argument("--sigma2-gamma", dest="sigma2_gamma", type=float)
    p_sim.add_argument("--sigma2-omega", dest="sigma2_omega", type=float)
    p_sim.add_argument("--sigma2-eps", dest="sigma2_eps", type=float)

    p_fit = sub.add_parser("fit", parents=[common, fitlike], help="fit a dataset")
    p_fit.add_argument("--curves")
    p_fit.add_argument("--covariates")
    p_fit.add_argument("--grid")

    p_sum = sub.add_parser("summarize", parents=[common], help="recompute summaries of a fit")
    p_sum.add_argument("--draws", help="output directory of a previous fit")

    p_bench = sub.add_parser(
        "benchmark", parents=[common, fitlike], help="simulate/fit/report over a size grid"
    )
    p_bench.add_argument(
        "--cells", help="semicolon-separated n,m,L triples, e.g. '10,5,5;20,5,5'"
    )
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise InvalidInputError(f"config file is not valid JSON: {err}") from None
    if not isinstance(cfg, dict):
        raise InvalidInputError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg: dict, key: str, default=None):
    """Flag value if given, else config value, else the built-in default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def _settings(args, cfg, defaults: dict) -> dict:
    return {k: _resolve(args, cfg, k, v) for k, v in defaults.items()}


def _file_fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _write_meta(out: Path, payload: dict) -> None:
    with open(out / "meta.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _require_out(args, cfg) -> Path:
    out = _resolve(args, cfg, "out")
    if out is None:
        raise InvalidInputError("an output directory is required (--out)")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    out = _require_out(args, cfg)
    s = _settings(args, cfg, _SIM_DEFAULTS)
    seed = int(_resolve(args, cfg, "seed", 0))
    K0 = int(_resolve(args, cfg, "K0", 15))
    design = SimulationDesign(
        n=int(s["n"]),
        m=int(s["m"]),
        L=int(s["L"]),
        T=int(s["T"]),
        K0=K0,
        sigma2_alpha=float(s["sigma2_alpha"]),
        sigma2_gamma=float(s["sigma2_gamma"]),
        sigma2_omega=float(s["sigma2_omega"]),
        sigma2_eps=float(s["sigma2_eps"]),
        seed=seed,
    )
    ds, truth = simulate_dataset(design)
    write_simulation(out, ds, truth, design)
    _write_meta(
        out,
        {
            "subcommand": "simulate",
            "design": json.loads(json.dumps(design.__dict__, default=str)),
            "seed": seed,
        },
    )
    return EXIT_OK


def _fit_once(curves, covariates, grid, settings: dict):
    """Shared by fit and benchmark: load, build basis, run, diagnose."""
    ds = load_dataset(curves, covariates, grid)
    basis = make_basis(
        ds.grid,
        K0=int(settings["K0"]),
        degree=int(settings["degree"]),
        penalty_order=int(settings["penalty_order"]),
        eig_tol=float(settings["eig_tol"]),
    )
    ctx = precompute(ds, basis)
    config = SamplerConfig(
        a=float(settings["a"]),
        b=float(settings["b"]),
        N=int(settings["N"]),
        N_burn=int(settings["burn"]),
        thin=int(settings["thin"]),
        seed=int(settings["seed"]),
        parallel_k=bool(settings["parallel_k"]),
        keep_random_effects=bool(settings["keep_random_effects"]),
    )
    sampler = settings["sampler"]
    if sampler == "naive":
        draws = naive_gibbs(ctx, config)
    elif sampler == "flfosr":
        draws = run_gibbs(ctx, config)
    else:
        raise InvalidInputError(f"unknown sampler: {sampler!r}")
    return ds, basis, ctx, draws


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    out = _require_out(args, cfg)
    settings = _settings(args, cfg, _FIT_DEFAULTS)
    settings["seed"] = int(_resolve(args, cfg, "seed", 0))
    curves = _resolve(args, cfg, "curves")
    covariates = _resolve(args, cfg, "covariates")
    grid = _resolve(args, cfg, "grid")
    if curves is None or covariates is None:
        raise InvalidInputError("fit requires --curves and --covariates")

    ds, basis, ctx, draws = _fit_once(curves, covariates, grid, settings)

    save_draws(draws, out / "draws")
    save_basis(basis, out / "basis")
    table = diagnostics.summarize(draws, basis)
    diagnostics.write_summary_csv(out / "summary.csv", table)
    report = diagnostics.efficiency_report(draws, basis)
    diagnostics.write_efficiency_csv(out / "efficiency.csv", report, ds.grid)
    diagnostics.write_report_json(out / "report.json", draws, efficiency=report)

    inputs = {"curves": _file_fingerprint(curves), "covariates": _file_fingerprint(covariates)}
    if grid is not None:
        inputs["grid"] = _file_fingerprint(grid)
    _write_meta(
        out,
        {
            "subcommand": "fit",
            "settings": settings,
            "input_files": {"curves": str(curves), "covariates": str(covariates), "grid": grid and str(grid)},
            "input_fingerprints": inputs,
            "context_fingerprints": ctx.fingerprints,
            "timings": {
                "seconds_burn": draws.seconds_burn,
                "seconds_sample": draws.seconds_sample,
            },
            "clamp_events": draws.meta.get("clamp_events"),
        },
    )
    return EXIT_OK


def cmd_summarize(args) -> int:
    cfg = _load_config(args.config)
    out = _require_out(args, cfg)
    fit_dir = _resolve(args, cfg, "draws")
    if fit_dir is None:
        raise InvalidInputError("summarize requires --draws pointing at a fit output directory")
    fit_dir = Path(fit_dir)
    if not (fit_dir / "draws").exists() or not (fit_dir / "basis").exists():
        raise InvalidInputError(f"not a fit output directory: {fit_dir}")
    from .basis import load_basis

    draws = load_draws(fit_dir / "draws")
    basis = load_basis(fit_dir / "basis")
    table = diagnostics.summarize(draws, basis)
    diagnostics.write_summary_csv(out / "summary.csv", table)
    report = diagnostics.efficiency_report(draws, basis)
    grid = np.asarray(draws.meta.get("grid", basis.grid), dtype=float)
    diagnostics.write_efficiency_csv(out / "efficiency.csv", report, grid)
    diagnostics.write_report_json(out / "report.json", draws, efficiency=report)
    _write_meta(out, {"subcommand": "summarize", "source": str(fit_dir)})
    return EXIT_OK


def _parse_cells(spec) -> list[tuple[int, int, int]]:
    cells = []
    if isinstance(spec, str):
        parts = [c for c in spec.split(";") if c.strip()]
        for part in parts:
            vals = [int(v) for v in part.split(",")]
            if len(vals) != 3:
                raise InvalidInputError(f"benchmark cell must be n,m,L: {part!r}")
            cells.append(tuple(vals))
    else:
        for row in spec:
            if len(row) != 3:
                raise InvalidInputError(f"benchmark cell must be n,m,L: {row!r}")
            cells.append(tuple(int(v) for v in row))
    if not cells:
        raise InvalidInputError("benchmark grid is empty")
    return cells


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config)
    out = _require_out(args, cfg)
    settings = _settings(args, cfg, _FIT_DEFAULTS)
    settings["seed"] = int(_resolve(args, cfg, "seed", 0))
    spec = _resolve(args, cfg, "cells")
    if spec is None:
        raise InvalidInputError("benchmark requires a grid (--cells or config 'cells')")
    cells = _parse_cells(spec)
    sim_cfg = {k: cfg.get(k, v) for k, v in _SIM_DEFAULTS.items() if k not in ("n", "m", "L")}

    rows = []
    failures = []
    for idx, (n, m, L) in enumerate(cells):
        cell_dir = out / f"cell_{idx:03d}"
        try:
            design = SimulationDesign(
                n=n,
                m=m,
                L=L,
                T=int(sim_cfg["T"]),
                K0=int(settings["K0"]),
                sigma2_alpha=float(sim_cfg["sigma2_alpha"]),
                sigma2_gamma=float(sim_cfg["sigma2_gamma"]),
                sigma2_omega=float(sim_cfg["sigma2_omega"]),
                sigma2_eps=float(sim_cfg["sigma2_eps"]),
                seed=int(settings["seed"]) + idx,
            )
            ds, truth = simulate_dataset(design)
            cell_dir.mkdir(parents=True, exist_ok=True)
            write_simulation(cell_dir, ds, truth, design)
            cell_settings = dict(settings)
            _, basis, ctx, draws = _fit_once(
                cell_dir / "curves.csv", cell_dir / "covariates.csv", cell_dir / "grid.csv",
                cell_settings,
            )
            report = diagnostics.efficiency_report(draws, basis)
            seconds = draws.seconds_burn + draws.seconds_sample
            rows.append((n, m, L, report.s1000, report.releff, seconds))
        except (InvalidInputError, NumericalError) as err:
            failures.append({"cell": [n, m, L], "error": str(err)})
            rows.append((n, m, L, float("nan"), float("nan"), float("nan")))
    with open(out / "benchmark.csv", "w") as fh:
        fh.write("n,m,L,s1000,releff,seconds\n")
        for n, m, L, s1000, releff, seconds in rows:
            fh.write(f"{n},{m},{L},{s1000!r},{releff!r},{seconds!r}\n")
    _write_meta(
        out,
        {
            "subcommand": "benchmark",
            "settings": settings,
            "cells": [list(c) for c in cells],
            "failures": failures,
        },
    )
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except InvalidInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"i/o failure: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
