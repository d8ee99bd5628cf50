"""Experiment configuration: strict JSON loading and construction of domain objects."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .core import (
    EpsilonModifiedGame,
    GameSpec,
    LinearGame,
    MigrationGraph,
    PopulationState,
    TimeGrid,
    WeightScheme,
    congestion_game,
    rps_game,
)
from .errors import PopMFGError
from .solver import DEFAULT_DT, SolverConfig


class ConfigError(PopMFGError, ValueError):
    pass


DEFAULT_OUTPUTS = {
    "trajectory": "trajectory.csv",
    "errors": "errors.csv",
    "compare": "compare.csv",
    "summary": "summary.json",
    "agents": "agents.csv",
    "diagnostics": "diagnostics.json",
}

DEFAULT_ANALYSIS = {
    "nash_tol": 1e-8,
    "probe_samples": 2000,
    "probe_seed": 0,
    "horizons": [4.0, 8.0, 16.0],
    "sweep_a": None,
    "sweep_N": None,
    "sweep_eps_f": None,
    "stationary_iters": 50,
    "stationary_tol": 1e-4,
}

_TOP_KEYS = {"description", "game", "scheme", "x0", "t0", "T", "dt", "solver", "mc", "analysis", "outputs"}


def _reject_unknown(block: Dict[str, Any], allowed, where: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(block) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError(f"{where} must be a finite number, got {value!r}")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def parse_game(block) -> GameSpec:
    if isinstance(block, str):
        block = {"name": block}
    if not isinstance(block, dict) or "name" not in block:
        raise ConfigError("game must be a name or an object with a 'name' key")
    name = block["name"]
    if name in ("congestion6", "rps3"):
        _reject_unknown(block, {"name"}, "game")
        return congestion_game() if name == "congestion6" else rps_game()
    if name == "linear":
        _reject_unknown(block, {"name", "A", "b"}, "game")
        if "A" not in block:
            raise ConfigError("linear game needs a payoff matrix 'A'")
        try:
            return LinearGame(np.asarray(block["A"], dtype=float),
                              None if block.get("b") is None else np.asarray(block["b"], dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid linear game: {exc}") from exc
    if name == "epsilon_modified":
        _reject_unknown(block, {"name", "base", "epsilon", "delta"}, "game")
        if "base" not in block or "epsilon" not in block:
            raise ConfigError("epsilon_modified game needs 'base' and 'epsilon'")
        base = parse_game(block["base"])
        eps = _number(block["epsilon"], "game.epsilon")
        delta = _number(block.get("delta", 1e-6), "game.delta")
        try:
            return EpsilonModifiedGame(base, eps, delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown game {name!r}")


def parse_scheme(block, n: int) -> WeightScheme:
    if block is None:
        return WeightScheme()
    if isinstance(block, str):
        block = {"kind": block}
    _reject_unknown(block, {"kind", "graph", "floor"}, "scheme")
    graph = block.get("graph")
    try:
        if graph is None:
            g = None
        elif graph == "complete":
            g = MigrationGraph.complete(n)
        elif graph == "ring":
            g = MigrationGraph.ring(n)
        else:
            g = MigrationGraph(np.asarray(graph, dtype=float))
        kwargs = {}
        if "floor" in block:
            kwargs["floor"] = _number(block["floor"], "scheme.floor")
        return WeightScheme(block.get("kind", "unit"), g, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid weight scheme: {exc}") from exc


def _check_analysis(opts: Dict[str, Any]) -> None:
    for key in ("nash_tol", "stationary_tol"):
        if _number(opts[key], f"analysis.{key}") <= 0:
            raise ConfigError(f"analysis.{key} must be positive")
    if _integer(opts["probe_samples"], "analysis.probe_samples") < 2:
        raise ConfigError("analysis.probe_samples must be at least 2")
    _integer(opts["probe_seed"], "analysis.probe_seed")
    if _integer(opts["stationary_iters"], "analysis.stationary_iters") < 1:
        raise ConfigError("analysis.stationary_iters must be positive")
    if any(h <= 0 for h in opts["horizons"]):
        raise ConfigError("analysis.horizons must be positive")
    if opts["sweep_a"] is not None and not 0 < _number(opts["sweep_a"], "analysis.sweep_a") <= 1:
        raise ConfigError("analysis.sweep_a must lie in (0, 1]")
    if opts["sweep_N"] is not None and _integer(opts["sweep_N"], "analysis.sweep_N") < 1:
        raise ConfigError("analysis.sweep_N must be positive")
    if opts["sweep_eps_f"] is not None and _number(opts["sweep_eps_f"], "analysis.sweep_eps_f") < 0:
        raise ConfigError("analysis.sweep_eps_f must be nonnegative")


@dataclass(frozen=True)
class MonteCarloConfig:
    n_agents: int
    seed: int = 0
    payoff: str = "myopic"


@dataclass(frozen=True)
class ExperimentConfig:
    game: GameSpec
    scheme: WeightScheme
    x0: PopulationState
    t0: float
    T: float
    dt: float
    a: float
    N: int
    eps_f: float
    mc: Optional[MonteCarloConfig] = None
    analysis: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_ANALYSIS))
    outputs: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))
    description: str = ""

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.t0, self.T, self.dt)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(self.grid, self.a, self.N, self.eps_f)

    def initial_counts(self) -> np.ndarray:
        """Integer agent counts closest to ``x0`` (largest-remainder rounding)."""
        n_agents = self.mc.n_agents
        raw = self.x0.masses * n_agents
        counts = np.floor(raw).astype(int)
        short = n_agents - counts.sum()
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
        return counts

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        _reject_unknown(doc, _TOP_KEYS, "config")
        if "game" not in doc:
            raise ConfigError("config needs a 'game'")
        game = parse_game(doc["game"])
        scheme = parse_scheme(doc.get("scheme"), game.n)

        x0_raw = doc.get("x0", "uniform")
        try:
            if x0_raw == "uniform":
                x0 = PopulationState.uniform(game.n)
            else:
                x0 = PopulationState(np.asarray(x0_raw, dtype=float))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid x0: {exc}") from exc
        if x0.n != game.n:
            raise ConfigError(f"x0 has {x0.n} entries, game has {game.n} strategies")

        t0 = _number(doc.get("t0", 0.0), "t0")
        T = _number(doc.get("T", 6.0), "T")
        dt = _number(doc.get("dt", DEFAULT_DT), "dt")
        if dt <= 0 or dt > (T - t0) / 2:
            raise ConfigError(f"dt must be positive and at most (T - t0)/2, got {dt}")

        solver = doc.get("solver", {})
        _reject_unknown(solver, {"a", "N", "eps_f"}, "solver")
        a = _number(solver.get("a", 0.01), "solver.a")
        N = _integer(solver.get("N", 100), "solver.N")
        eps_f = _number(solver.get("eps_f", 0.0), "solver.eps_f")

        mc = None
        if doc.get("mc") is not None:
            block = doc["mc"]
            _reject_unknown(block, {"n_agents", "seed", "payoff"}, "mc")
            if "n_agents" not in block:
                raise ConfigError("mc block needs 'n_agents'")
            n_agents = _integer(block["n_agents"], "mc.n_agents")
            if n_agents < 1:
                raise ConfigError(f"mc.n_agents must be positive, got {n_agents}")
            payoff = block.get("payoff", "myopic")
            if payoff not in ("myopic", "optimal"):
                raise ConfigError("mc.payoff must be 'myopic' or 'optimal'")
            mc = MonteCarloConfig(n_agents, _integer(block.get("seed", 0), "mc.seed"), payoff)

        analysis = dict(DEFAULT_ANALYSIS)
        if doc.get("analysis") is not None:
            _reject_unknown(doc["analysis"], DEFAULT_ANALYSIS, "analysis")
            analysis.update(doc["analysis"])
        horizons = analysis["horizons"]
        if not isinstance(horizons, list):
            raise ConfigError("analysis.horizons must be a list (empty skips the sweep)")
        analysis["horizons"] = [_number(h, "analysis.horizons") for h in horizons]
        _check_analysis(analysis)

        outputs = dict(DEFAULT_OUTPUTS)
        if doc.get("outputs") is not None:
            _reject_unknown(doc["outputs"], DEFAULT_OUTPUTS, "outputs")
            for key, value in doc["outputs"].items():
                if not isinstance(value, str) or not value or Path(value).name != value:
                    raise ConfigError(f"outputs.{key} must be a plain file name")
            outputs.update(doc["outputs"])

        try:
            cfg = cls(game, scheme, x0, t0, T, dt, a, N, eps_f, mc, analysis, outputs,
                      str(doc.get("description", "")))
            cfg.solver  # validates grid and solver numbers
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("popmfg") / "configs" / name))


def bundled_configs() -> List[str]:
    return sorted(p.name for p in (resources.files("popmfg") / "configs").iterdir() if p.name.endswith(".json"))


def load_config(path) -> ExperimentConfig:
    """Load a config file; bare names of bundled configs (``rps.json``) also resolve."""
    p = Path(path)
    if not p.exists() and p.name in bundled_configs() and p.name == str(path):
        p = bundled_config_path(p.name)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return ExperimentConfig.from_dict(doc)
