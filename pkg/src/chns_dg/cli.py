"""Command-line driver: single runs and convergence studies.

Configs use a flat ``key = value`` grammar with ``#`` comments.  Every run
writes ``config.echo`` (the fully resolved configuration), a
``timeseries.csv`` diagnostics table, and optional VTK snapshots; the
``convergence`` command adds a ``rates.csv`` table per the usual
ln(err_h / err_{h/2}) / ln(2) formula.
"""

import argparse
import math
import os
import sys

import numpy as np

from .diagnostics import error_norms
from .forms import PenaltyConfig
from .manufactured import manufactured_solution
from .mesh import build_structured_mesh
from .simulation import SchemeParams, Simulation, manufactured_forcing
from .vtk_io import write_vtk

PROBLEMS = ("stationary", "manufactured-2d", "manufactured-3d", "spinodal")

_DEFAULTS = {
    "problem": "spinodal",
    "dim": 2,
    "cells_per_axis": 32,
    "k": 1,
    "tau": 1e-3,
    "T": 0.032,
    "kappa": 1e-4,
    "mu_s": 1.0,
    "sigma_chi": 1.0 / 12.0,
    # penalty defaults resolve per polynomial degree unless overridden
    "sigma_tilde_ch": None,
    "sigma_tilde_ellip": None,
    "sigma_int": None,
    "sigma_bdy": None,
    "seed": 0,
    "output": "out",
    "snapshot_every": 0,
    "c0_mean": 0.0,
}

_TYPES = {
    "problem": str, "dim": int, "cells_per_axis": int, "k": int,
    "tau": float, "T": float, "kappa": float, "mu_s": float,
    "sigma_chi": float, "sigma_tilde_ch": float, "sigma_tilde_ellip": float,
    "sigma_int": float, "sigma_bdy": float, "seed": int, "output": str,
    "snapshot_every": int, "c0_mean": float,
}


class ConfigError(ValueError):
    pass


def parse_config(path):
    """Parse ``key = value`` lines; unknown keys and bad values are errors."""
    config = dict(_DEFAULTS)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                config[key] = _TYPES[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    validate_config(config)
    return config


def validate_config(config):
    if config["problem"] not in PROBLEMS:
        raise ConfigError(f"unknown problem {config['problem']!r}; "
                          f"choose from {', '.join(PROBLEMS)}")
    if config["problem"] == "manufactured-2d":
        config["dim"] = 2
    elif config["problem"] == "manufactured-3d":
        config["dim"] = 3
    if config["dim"] not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    for key in ("tau", "T", "kappa", "mu_s", "sigma_chi"):
        if config[key] <= 0:
            raise ConfigError(f"{key} must be positive")
    if config["cells_per_axis"] < 1:
        raise ConfigError("cells_per_axis must be >= 1")
    if config["k"] < 1:
        raise ConfigError("k must be >= 1")
    if config["sigma_chi"] > 1.0 / (4 * config["dim"]):
        raise ConfigError("sigma_chi must lie in (0, 1/(4 dim)]")
    rec = recommended_penalties(config["k"])
    for key, value in (("sigma_tilde_ch", rec.sigma_tilde_ch),
                       ("sigma_tilde_ellip", rec.sigma_tilde_ellip),
                       ("sigma_int", rec.sigma_int),
                       ("sigma_bdy", rec.sigma_bdy)):
        if config[key] is None:
            config[key] = value
        elif config[key] < 1.0:
            raise ConfigError(f"{key} must be >= 1")
    return config


def scheme_params(config):
    return SchemeParams(
        kappa=config["kappa"], mu_s=config["mu_s"], tau=config["tau"],
        degree=config["k"], sigma_chi=config["sigma_chi"],
        penalties=PenaltyConfig(config["sigma_tilde_ch"],
                                config["sigma_tilde_ellip"],
                                config["sigma_int"], config["sigma_bdy"]),
        t_end=config["T"])


def build_problem(config, sim):
    """Initial state, forcing, and exact solution for the configured problem."""
    problem = config["problem"]
    if problem == "spinodal":
        return sim.initialize_spinodal(config["seed"]), None, None
    if problem == "stationary":
        mean = config["c0_mean"]
        state = sim.initialize(lambda x: np.full(x.shape[0], mean),
                               lambda x: np.zeros_like(x),
                               grad_c0=lambda x: np.zeros_like(x))
        return state, None, None
    sol = manufactured_solution(config["dim"], kappa=config["kappa"],
                                mu_s=config["mu_s"])
    state = sim.initialize(lambda x: sol.c(0.0, x), lambda x: sol.u(0.0, x),
                           grad_c0=lambda x: sol.grad_c(0.0, x))
    return state, manufactured_forcing(sol), sol


def _write_config_echo(config, outdir):
    with open(os.path.join(outdir, "config.echo"), "w") as fh:
        for key in sorted(config):
            fh.write(f"{key} = {config[key]}\n")


TIMESERIES_HEADER = "step,time,mass,energy,modified_energy,dissipation_ok,newton_iters"
ERROR_COLUMNS = ",l2_error_c,l2_error_u,l2_error_p"


def run_simulation(config, outdir):
    """Execute one configured run; returns (final state, records, errors)."""
    os.makedirs(outdir, exist_ok=True)
    _write_config_echo(config, outdir)
    domain = [(0.0, 1.0)] * config["dim"]
    mesh = build_structured_mesh(domain, config["cells_per_axis"])
    params = scheme_params(config)
    sim = Simulation(mesh, params)
    state, forcing, sol = build_problem(config, sim)
    n_steps = params.n_steps
    every = config["snapshot_every"]

    def snapshot(step, st):
        write_vtk(os.path.join(outdir, f"snapshot_{step:06d}.vtk"), mesh,
                  scalars={"c": st.c, "mu": st.mu, "p": st.p},
                  vectors={"u": st.u})

    observers = []
    if every > 0:
        snapshot(0, state)
        observers.append(lambda n, st, rec: snapshot(n, st) if n % every == 0 else None)

    state, records = sim.run(state, n_steps, forcing=forcing, observers=observers)

    errors = None
    if sol is not None:
        t_end = state.t
        err_c, _ = error_norms(state.c, lambda x: sol.c(t_end, x))
        err_u, _ = error_norms(state.u, lambda x: sol.u(t_end, x))
        err_p, _ = error_norms(state.p, lambda x: sol.p(t_end, x))
        errors = (err_c, err_u, err_p)

    header = TIMESERIES_HEADER + (ERROR_COLUMNS if sol is not None else "")
    lines = [header]
    for rec in records:
        row = (f"{rec.step},{rec.time:.12g},{rec.mass:.15e},{rec.energy:.15e},"
               f"{rec.modified_energy:.15e},{int(rec.dissipation_ok)},"
               f"{rec.newton_iterations}")
        if sol is not None:
            if rec is records[-1]:
                row += ",{:.15e},{:.15e},{:.15e}".format(*errors)
            else:
                row += ",,,"
        lines.append(row)
    with open(os.path.join(outdir, "timeseries.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return state, records, errors


def convergence_rates(h_values, error_table):
    """Rate table rows (h, err..., rate...) per ln(e_h/e_{h/2})/ln(2)."""
    rows = []
    for i, h in enumerate(h_values):
        row = [h]
        for series in error_table:
            err = series[i]
            if i == 0:
                row.extend([err, None])
            else:
                rate = math.log(series[i - 1] / err) / math.log(2.0)
                row.extend([err, rate])
        rows.append(row)
    return rows


def run_convergence(config, levels, outdir):
    os.makedirs(outdir, exist_ok=True)
    h_values, errs_c, errs_u, errs_p = [], [], [], []
    failure = None
    for cells in levels:
        level_cfg = dict(config)
        level_cfg["cells_per_axis"] = cells
        level_cfg["snapshot_every"] = 0
        try:
            state, _, errors = run_simulation(level_cfg,
                                              os.path.join(outdir, f"n{cells}"))
        except Exception as exc:
            failure = exc
            break
        h_values.append(math.sqrt(config["dim"]) / cells)
        errs_c.append(errors[0])
        errs_u.append(errors[1])
        errs_p.append(errors[2])

    rows = convergence_rates(h_values, [errs_c, errs_u, errs_p])
    lines = ["h,err_c,rate_c,err_u,rate_u,err_p,rate_p"]
    for row in rows:
        cells_str = [f"{row[0]:.9g}"]
        for v in row[1:]:
            cells_str.append("" if v is None else f"{v:.6g}")
        lines.append(",".join(cells_str))
    with open(os.path.join(outdir, "rates.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    if failure is not None:
        raise failure
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="chns-dg",
        description="dG pressure-projection solver for Cahn-Hilliard-Navier-Stokes")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one configured simulation")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--output", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_conv = sub.add_parser("convergence", help="run a mesh-refinement study")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--output", default=None)
    p_conv.add_argument("--seed", type=int, default=None)
    p_conv.add_argument("--levels", required=True,
                        help="comma-separated cells_per_axis values")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        outdir = args.output or config["output"]
        config["output"] = outdir
        if args.command == "run":
            run_simulation(config, outdir)
        else:
            levels = [int(tok) for tok in args.levels.split(",") if tok]
            if len(levels) < 2:
                raise ConfigError("convergence needs at least two levels")
            if config["problem"] not in ("manufactured-2d", "manufactured-3d"):
                raise ConfigError("convergence requires a manufactured problem")
            run_convergence(config, levels, outdir)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - one-line machine-parsable failure
        print(f"error: run: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
