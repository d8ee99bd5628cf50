"""Finite-population simulation with first-order (Euler) switching.

Over a step of length dt an agent at strategy i moves to j with probability
rate(i, j) * dt and stays put otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import GameSpec, PopulationState, TimeGrid, Trajectory, WeightScheme, as_vector, evaluate_payoff
from .errors import InvalidInputError, StepSizeError
from .protocols import OptimalPairwise, rate_matrix

RATE_SLACK = 1e-12

Rates = Union[np.ndarray, Callable[[int, int], float]]


def _rng_from_state(state: dict) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


@dataclass(frozen=True, eq=False)
class AgentPopulation:
    """Strategy index per agent plus the PRNG state that drives its next step."""

    strategies: np.ndarray
    n_strategies: int
    rng_state: dict

    @classmethod
    def from_counts(cls, counts, seed: int) -> "AgentPopulation":
        counts = np.asarray(counts)
        if counts.ndim != 1 or counts.size < 2:
            raise InvalidInputError("counts must be a vector over at least two strategies")
        if np.any(counts < 0) or np.any(counts != np.round(counts)) or counts.sum() < 1:
            raise InvalidInputError("counts must be nonnegative integers with at least one agent")
        strategies = np.repeat(np.arange(counts.size), counts.astype(int))
        return cls(strategies, counts.size, np.random.PCG64(seed).state)

    def __post_init__(self):
        s = np.array(self.strategies, dtype=np.int64)
        if s.ndim != 1 or s.size < 1:
            raise InvalidInputError("population needs at least one agent")
        if s.min() < 0 or s.max() >= self.n_strategies:
            raise InvalidInputError("strategy index out of range")
        s.setflags(write=False)
        object.__setattr__(self, "strategies", s)

    @property
    def n_agents(self) -> int:
        return self.strategies.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.strategies, minlength=self.n_strategies)

    def distribution(self) -> np.ndarray:
        return self.counts() / self.n_agents

    def state(self) -> PopulationState:
        return PopulationState(self.distribution())


def _as_rate_matrix(rates: Rates, n: int) -> np.ndarray:
    if callable(rates):
        R = np.array([[0.0 if i == j else float(rates(i, j)) for j in range(n)] for i in range(n)])
    else:
        R = np.array(rates, dtype=float)
        if R.shape != (n, n):
            raise InvalidInputError(f"rate matrix must be {n}x{n}, got {R.shape}")
        np.fill_diagonal(R, 0.0)
    if np.any(R < 0) or not np.all(np.isfinite(R)):
        raise InvalidInputError("rates must be finite and nonnegative")
    return R


def transition_matrix(R: np.ndarray, dt: float) -> np.ndarray:
    """Row-stochastic one-step matrix; raises if some row would need probability > 1."""
    out = R.sum(axis=1)
    worst = int(np.argmax(out))
    if dt * out[worst] > 1.0 + RATE_SLACK:
        raise StepSizeError(
            f"dt * total outflow rate = {dt * out[worst]:.4g} > 1 at strategy {worst}; "
            f"use a step of at most {1.0 / out[worst]:.4g}")
    P = R * dt
    np.fill_diagonal(P, np.clip(1.0 - dt * out, 0.0, None))
    return P


def sample_transitions(strategies: np.ndarray, P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw each agent's next strategy from row ``P[s]`` (agents independent)."""
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = np.inf
    u = rng.random(strategies.size)
    return np.argmax(u[:, None] < cum[strategies], axis=1)


def sample_transitions_per_agent(strategies: np.ndarray, P_agents: np.ndarray,
                                 rng: np.random.Generator) -> np.ndarray:
    """Like ``sample_transitions`` with one transition row per agent."""
    cum = np.cumsum(P_agents, axis=1)
    cum[:, -1] = np.inf
    u = rng.random(strategies.size)
    return np.argmax(u[:, None] < cum, axis=1)


def step(pop: AgentPopulation, rates: Rates, dt: float) -> AgentPopulation:
    if not dt > 0:
        raise InvalidInputError("step length must be positive")
    R = _as_rate_matrix(rates, pop.n_strategies)
    P = transition_matrix(R, dt)
    rng = _rng_from_state(pop.rng_state)
    new = sample_transitions(pop.strategies, P, rng)
    return AgentPopulation(new, pop.n_strategies, rng.bit_generator.state)


def simulate(game: GameSpec, scheme: WeightScheme, x0_counts, grid: TimeGrid, seed: int,
             payoff_source: Optional[Trajectory] = None) -> Trajectory:
    """Empirical strategy distribution at every grid node.

    Rates follow the optimal pairwise protocol, computed once per step from the
    pre-step empirical state. Payoffs are myopic (F of the empirical state)
    unless ``payoff_source`` gives a frozen value path, read at mid-step.
    """
    pop = AgentPopulation.from_counts(x0_counts, seed)
    n = pop.n_strategies
    if n != game.n:
        raise InvalidInputError(f"game has {game.n} strategies, counts have {n}")
    if payoff_source is not None and payoff_source.grid != grid:
        raise InvalidInputError("frozen payoff grid does not match the simulation grid")
    protocol = OptimalPairwise(scheme)
    dt = grid.dt
    out = np.empty((grid.n_nodes, n))
    out[0] = pop.distribution()
    for m in range(grid.M):
        x = out[m]
        if payoff_source is None:
            p = evaluate_payoff(game, x)
        else:
            p = 0.5 * (payoff_source.nodes[m] + payoff_source.nodes[m + 1])
        try:
            pop = step(pop, rate_matrix(protocol, p, x), dt)
        except StepSizeError as exc:
            raise StepSizeError(f"t={grid.times[m]:g}: {exc}; refine the grid") from exc
        out[m + 1] = pop.distribution()
    return Trajectory(grid, out, is_state=True)


def sup_distance(a: Trajectory, b: Trajectory) -> float:
    """Largest per-node max-norm gap between two trajectories on one grid."""
    if a.grid != b.grid:
        raise InvalidInputError("trajectories live on different grids")
    return float(np.max(np.abs(a.nodes - b.nodes)))
