"""Backward value (payoff) dynamics along a frozen population-state trajectory.

The optimal switch intensities minimize the quadratic revision cost in closed
form, alpha_ij = [v_j - v_i]_+ / q_ij, which leaves the Hamiltonian

    dv_i/dt = -1/2 * sum_j [v_j - v_i]_+^2 / q_ij(x) - F_i(x),   v(T) = F(x(T)).
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .core import GameSpec, TimeGrid, Trajectory, WeightScheme, as_vector, evaluate_payoff
from .errors import InvalidInputError, NumericalFailureError
from .protocols import game_params


class ValueTrajectory(Trajectory):
    """Trajectory of v(t, x(t)); the terminal node is F(x(T))."""

    def __init__(self, grid, nodes):
        super().__init__(grid, nodes, is_state=False)


def hj_rhs(game: GameSpec, scheme: WeightScheme, v, x) -> np.ndarray:
    v = as_vector(v)
    x = as_vector(x)
    if v.shape != x.shape:
        raise InvalidInputError(f"value shape {v.shape} does not match state shape {x.shape}")
    F = evaluate_payoff(game, x)
    gap = np.maximum(v[None, :] - v[:, None], 0.0)  # [v_j - v_i]_+
    return -0.5 * np.sum(scheme.conductance(x) * gap ** 2, axis=1) - F


def integrate_backward(game: GameSpec, scheme: WeightScheme, x_frozen: Trajectory,
                       grid: TimeGrid) -> ValueTrajectory:
    """RK4 in reversed time tau = T - t, frozen states interpolated at half steps."""
    if x_frozen.grid != grid:
        raise InvalidInputError(f"frozen state grid {x_frozen.grid} does not match {grid}")
    n = x_frozen.n
    if n != game.n:
        raise InvalidInputError(f"game has {game.n} strategies, trajectory has {n}")
    X = np.ascontiguousarray(x_frozen.nodes)
    vT = evaluate_payoff(game, X[-1])
    A, b, eps, delta = game_params(game)
    Vn = _kernels.backward(A, b, eps, delta, scheme.kind_code,
                           np.ascontiguousarray(scheme.adjacency(n), dtype=float),
                           scheme.floor, X, vT, grid.dt, grid.M)
    Vn[-1] = vT
    bad = ~np.all(np.isfinite(Vn), axis=1)
    if bad.any():
        t_bad = grid.times[len(bad) - 1 - np.argmax(bad[::-1])]
        raise NumericalFailureError(f"backward integration produced non-finite values at t={t_bad:g}")
    return ValueTrajectory(grid, Vn)
