"""Command-line front end: ``popmfg {solve,compare,agents,analyze} --config C --out D``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (including a
Monte Carlo step that is too coarse), 4 precondition or domain error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from . import __version__
from .agents import simulate, sup_distance
from .analysis import (
    contractiveness_probe,
    horizon_sweep,
    is_nash,
    nash_equilibrium,
    positive_correlation_audit,
    stationary_diagnostics,
)
from .config import ConfigError, ExperimentConfig, load_config
from .core import Trajectory, evaluate_payoff
from .errors import DomainError, InvalidInputError, NumericalFailureError, StepSizeError
from .protocols import OptimalPairwise, SmithStatic, ed_vector_field, integrate_forward
from .solver import SolverConfig, solve

log = logging.getLogger("popmfg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_DOMAIN = 4


def fmt(value: float) -> str:
    """Positional decimal with 17 significant digits (round-trips exactly)."""
    return np.format_float_positional(value, precision=17, unique=False, fractional=False, trim="k")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_csv(path) -> tuple:
    """Header and float matrix of a CSV written by this module."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def _cols(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{i + 1}" for i in range(n)]


def _time_avg_distance(traj: Trajectory, x_star: np.ndarray) -> float:
    d = np.linalg.norm(traj.nodes - x_star, axis=1)
    g = traj.grid
    return float(g.dt * (d.sum() - 0.5 * (d[0] + d[-1])) / (g.T - g.t0))


# --- subcommands -------------------------------------------------------------

def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    res = solve(cfg.game, cfg.scheme, cfg.x0, cfg.solver)
    n = cfg.game.n
    write_csv(out / cfg.outputs["trajectory"], ["t"] + _cols("x", n) + _cols("v", n),
              (np.concatenate([[t], x, v]) for t, x, v in
               zip(res.x_star.times, res.x_star.nodes, res.v_star.nodes)))
    write_csv(out / cfg.outputs["errors"], ["k", "e"],
              ((k, e) for k, e in enumerate(res.error_history)))
    print(f"iterations={res.iterations_run} final_error={res.final_error:.6e} converged={res.converged}")
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, out: Path) -> int:
    res = solve(cfg.game, cfg.scheme, cfg.x0, cfg.solver)
    smith = integrate_forward(SmithStatic(), cfg.game, cfg.x0, cfg.grid)
    x_star = nash_equilibrium(cfg.game, cfg.analysis["nash_tol"]).masses
    n = cfg.game.n
    write_csv(out / cfg.outputs["compare"], ["t"] + _cols("x_opt", n) + _cols("x_smith", n),
              (np.concatenate([[t], a, b]) for t, a, b in
               zip(res.x_star.times, res.x_star.nodes, smith.nodes)))
    summary = {
        "nash_equilibrium": x_star.tolist(),
        "optimal": {
            "time_averaged_distance": _time_avg_distance(res.x_star, x_star),
            "terminal_distance": float(np.linalg.norm(res.x_star.nodes[-1] - x_star)),
        },
        "smith": {
            "time_averaged_distance": _time_avg_distance(smith, x_star),
            "terminal_distance": float(np.linalg.norm(smith.nodes[-1] - x_star)),
        },
        "solver": {"iterations_run": res.iterations_run, "final_error": res.final_error},
    }
    write_json(out / cfg.outputs["summary"], summary)
    print("optimal: avg={time_averaged_distance:.6g} terminal={terminal_distance:.6g}".format(**summary["optimal"]))
    print("smith:   avg={time_averaged_distance:.6g} terminal={terminal_distance:.6g}".format(**summary["smith"]))
    return EXIT_OK


def cmd_agents(cfg: ExperimentConfig, out: Path) -> int:
    grid = cfg.grid
    frozen = None
    if cfg.mc.payoff == "optimal":
        frozen = solve(cfg.game, cfg.scheme, cfg.x0, cfg.solver).v_star
    counts = cfg.initial_counts()
    x_start = counts / counts.sum()
    empirical = simulate(cfg.game, cfg.scheme, counts, grid, cfg.mc.seed, payoff_source=frozen)
    ode = integrate_forward(OptimalPairwise(cfg.scheme), cfg.game, x_start, grid, p_source=frozen)
    n = cfg.game.n
    write_csv(out / cfg.outputs["agents"], ["t"] + _cols("xhat", n) + _cols("xode", n),
              (np.concatenate([[t], a, b]) for t, a, b in zip(grid.times, empirical.nodes, ode.nodes)))
    dist = sup_distance(empirical, ode)
    write_json(out / cfg.outputs["summary"], {"n_agents": cfg.mc.n_agents, "seed": cfg.mc.seed,
                                              "payoff": cfg.mc.payoff, "sup_distance": dist})
    print(f"sup_distance={dist:.6g}")
    return EXIT_OK


def cmd_analyze(cfg: ExperimentConfig, out: Path) -> int:
    opts = cfg.analysis
    game, scheme = cfg.game, cfg.scheme
    tol = float(opts["nash_tol"])
    x_star = nash_equilibrium(game, tol).masses
    stationarity = float(np.max(np.abs(ed_vector_field(OptimalPairwise(scheme), evaluate_payoff(game, x_star), x_star))))
    doc = {
        "nash_equilibrium": {
            "x": x_star.tolist(),
            "is_nash": is_nash(game, x_star, tol),
            "stationarity_residual": stationarity,
            "pass": bool(is_nash(game, x_star, tol) and stationarity < 1e-8),
        }
    }

    probe = contractiveness_probe(game, int(opts["probe_samples"]), int(opts["probe_seed"]))
    doc["contractiveness"] = {
        "contractive_margin": probe.contractive_margin,
        "strong_epsilon_estimate": probe.strong_epsilon_estimate,
        "contractive": probe.contractive,
        "strongly_contractive": probe.strong_epsilon_estimate > 0,
        "pass": probe.contractive,
    }

    res = solve(game, scheme, cfg.x0, cfg.solver)
    audit = positive_correlation_audit(res.v_star, res.x_star, scheme)
    doc["positive_correlation"] = {
        "min_inner_product": audit.min_inner_product,
        "violations": audit.violations,
        "pass": audit.violations == 0,
    }

    if x_star.min() > tol:
        iters = min(cfg.N, int(opts["stationary_iters"]))
        stat_res = solve(game, scheme, x_star, SolverConfig(cfg.grid, cfg.a, iters, 0.0))
        diag = stationary_diagnostics(game, x_star, stat_res.v_star, tol=max(tol, 1e-9))
        doc["stationary"] = {
            "kappa": diag.kappa,
            "max_form_residual": diag.max_form_residual,
            "pass": diag.max_form_residual <= float(opts["stationary_tol"]),
        }
    else:
        doc["stationary"] = {"skipped": "equilibrium is not interior", "pass": None}

    horizons = opts["horizons"]
    if horizons:
        template = SolverConfig(
            cfg.grid,
            cfg.a if opts["sweep_a"] is None else float(opts["sweep_a"]),
            cfg.N if opts["sweep_N"] is None else int(opts["sweep_N"]),
            cfg.eps_f if opts["sweep_eps_f"] is None else float(opts["sweep_eps_f"]),
        )
        points = horizon_sweep(game, scheme, cfg.x0, horizons, template, x_star)
        dists = [p.midpoint_distance for p in points]
        decreasing = all(b < a for a, b in zip(dists, dists[1:]))
        doc["horizon_sweep"] = {
            "points": [{"T": p.T, "midpoint_distance": p.midpoint_distance} for p in points],
            "strictly_decreasing": decreasing,
            "pass": decreasing,
        }
    else:
        doc["horizon_sweep"] = {"skipped": "no horizons configured", "pass": None}

    write_json(out / cfg.outputs["diagnostics"], doc)
    for key, block in doc.items():
        print(f"{key}: {'skipped' if block['pass'] is None else ('pass' if block['pass'] else 'FAIL')}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "agents": cmd_agents, "analyze": cmd_analyze}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="popmfg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run the fixed-point solver; write trajectory and error-history CSVs",
        "compare": "optimal protocol vs Smith dynamics from the same start",
        "agents": "finite-agent simulation against the mean-field ODE",
        "analyze": "equilibrium, contractiveness, correlation, stationarity and horizon diagnostics",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON config path (or a bundled name, e.g. rps.json)")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "agents" and cfg.mc is None:
        print("config error: the agents command needs an 'mc' block", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailureError, StepSizeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, InvalidInputError) as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
