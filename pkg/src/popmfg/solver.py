"""Damped fixed-point iteration between the forward state and backward value passes."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .core import GameSpec, PopulationState, TimeGrid, Trajectory, WeightScheme, as_vector, check_simplex
from .errors import InvalidInputError, NumericalFailureError
from .hj import ValueTrajectory, integrate_backward
from .protocols import OptimalPairwise, integrate_forward

log = logging.getLogger(__name__)

DEFAULT_DT = 0.01


@dataclass(frozen=True)
class SolverConfig:
    """``a`` is the moving-average weight, ``max_iters`` the iteration cap and
    ``tol`` the early-stop threshold on the fixed-point error (0 disables it)."""

    grid: TimeGrid
    a: float = 0.01
    max_iters: int = 100
    tol: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise InvalidInputError(f"moving-average weight must lie in (0, 1], got {self.a}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tol >= 0.0:
            raise InvalidInputError(f"tolerance must be nonnegative, got {self.tol}")


@dataclass(frozen=True)
class SolveResult:
    x_star: Trajectory
    v_star: ValueTrajectory
    error_history: np.ndarray
    iterations_run: int
    converged: bool

    @property
    def final_error(self) -> float:
        return float(self.error_history[-1])


def fixed_point_error(x_a: Trajectory, x_b: Trajectory) -> float:
    """Trapezoidal approximation of the integral of ||x_a(t) - x_b(t)||^2 over the grid."""
    if x_a.grid != x_b.grid:
        raise InvalidInputError("trajectories live on different grids")
    if x_a.n != x_b.n:
        raise InvalidInputError("trajectories have different dimensions")
    sq = np.sum((x_a.nodes - x_b.nodes) ** 2, axis=1)
    dt = x_a.grid.dt
    return float(dt * (sq.sum() - 0.5 * (sq[0] + sq[-1])))


IterationCallback = Callable[[int, Trajectory, Optional[ValueTrajectory]], None]


def solve(game: GameSpec, scheme: WeightScheme, x0, config: SolverConfig,
          callback: Optional[IterationCallback] = None) -> SolveResult:
    """Compute the coupled state/value trajectories.

    The state path starts from the myopic dynamics (p = F(x)) and is then
    refined by alternating a backward value pass along the current states with
    a forward pass under the frozen values, blended node-wise with weight
    ``config.a``. ``callback(k, x_k, v_k)`` sees every iterate x^(k) together
    with the value path it produced (None for k = 0).
    """
    x0 = as_vector(x0)
    check_simplex(x0)
    grid = config.grid
    protocol = OptimalPairwise(scheme)
    a = config.a

    try:
        x_k = integrate_forward(protocol, game, x0, grid)
    except NumericalFailureError as exc:
        raise NumericalFailureError(f"initialization failed: {exc}", iteration=0) from exc
    if callback is not None:
        callback(0, x_k, None)

    errors: List[float] = []
    v_next = None
    for k in range(config.max_iters):
        try:
            v_next = integrate_backward(game, scheme, x_k, grid)
            x_prime = integrate_forward(protocol, game, x0, grid, p_source=v_next)
        except NumericalFailureError as exc:
            raise NumericalFailureError(f"iteration {k}: {exc}", iteration=k) from exc
        blended = (1.0 - a) * x_k.nodes + a * x_prime.nodes
        blended[0] = x0  # the blend of x0 with itself can drift in the last bit
        x_next = Trajectory(grid, blended, is_state=True)
        e = fixed_point_error(x_k, x_next)
        if not np.isfinite(e):
            raise NumericalFailureError(f"iteration {k}: non-finite fixed-point error", iteration=k)
        errors.append(e)
        x_k = x_next
        if callback is not None:
            callback(k + 1, x_k, v_next)
        if config.tol > 0.0 and e <= config.tol:
            break

    history = np.asarray(errors)
    # tol = 0 never stops early, but an exactly zero error still counts as converged
    converged = bool(history[-1] <= config.tol)
    log.debug("solve finished after %d iterations, final error %.3e", len(errors), history[-1])
    return SolveResult(x_k, v_next, history, len(errors), converged)
