"""Revision protocols, evolutionary-dynamics vector fields and the forward integrator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels
from .core import (
    GameSpec,
    MigrationGraph,
    PopulationState,
    TimeGrid,
    Trajectory,
    WeightScheme,
    as_vector,
    check_simplex,
)
from .errors import DomainError, InvalidInputError, NumericalFailureError

CLOSED_FORM_MODELS = ("smith", "replicator", "projection")


@dataclass(frozen=True)
class OptimalPairwise:
    """rho_ij = [p_j - p_i]_+ / q_ij(x)."""

    scheme: WeightScheme = field(default_factory=WeightScheme)


@dataclass(frozen=True)
class SmithStatic:
    """The classical Smith protocol rho_ij = [p_j - p_i]_+ on the complete graph."""


@dataclass(frozen=True)
class ClosedForm:
    model: str
    graph: Optional[MigrationGraph] = None

    def __post_init__(self):
        if self.model not in CLOSED_FORM_MODELS:
            raise InvalidInputError(f"unknown closed-form model {self.model!r}")


ProtocolKind = Union[OptimalPairwise, SmithStatic, ClosedForm]

# closed forms that coincide with an optimal pairwise protocol
_MODEL_TO_SCHEME = {"smith": "unit", "replicator": "inverse_target_mass", "projection": "self_mass"}


def _dims(p, x):
    p = as_vector(p)
    x = as_vector(x)
    if p.ndim != 1 or p.shape != x.shape:
        raise InvalidInputError(f"payoff shape {p.shape} does not match state shape {x.shape}")
    return p, x


def _check_interior(x, floor):
    if x.min() < floor:
        raise DomainError(f"state is not interior: min entry {x.min():.3e} < {floor:g}")


def rate_matrix(kind: ProtocolKind, p, x) -> np.ndarray:
    """All switch rates rho_ij as an n-by-n matrix with a zero diagonal."""
    p, x = _dims(p, x)
    gain = np.maximum(p[None, :] - p[:, None], 0.0)
    if isinstance(kind, SmithStatic):
        np.fill_diagonal(gain, 0.0)
        return gain
    if isinstance(kind, OptimalPairwise):
        return gain * kind.scheme.conductance(x)
    if kind.model == "replicator":
        _check_interior(x, 0.0)
    elif kind.model == "projection":
        _check_interior(x, np.finfo(float).tiny)
    # closed forms are exact, so no mass floor
    scheme = WeightScheme(_MODEL_TO_SCHEME[kind.model], kind.graph, floor=np.finfo(float).tiny)
    return gain * scheme.conductance(x)


def protocol_rate(kind: ProtocolKind, p, x, i: int, j: int) -> float:
    p, x = _dims(p, x)
    if not (0 <= i < x.size and 0 <= j < x.size):
        raise InvalidInputError(f"strategy index out of range for n={x.size}: ({i}, {j})")
    if i == j:
        raise InvalidInputError("switch rates are defined only for i != j")
    return float(rate_matrix(kind, p, x)[i, j])


def _pairwise(R, x):
    return R.T @ x - x * R.sum(axis=1)


def ed_vector_field(kind: ProtocolKind, p, x) -> np.ndarray:
    """V_i = sum_j x_j rho_ji - x_i sum_j rho_ij."""
    p, x = _dims(p, x)
    if isinstance(kind, ClosedForm):
        return closed_form_field(kind.model, p, x, kind.graph)
    return _pairwise(rate_matrix(kind, p, x), x)


def closed_form_field(model: str, p, x, graph: Optional[MigrationGraph] = None,
                      floor: float = 1e-8) -> np.ndarray:
    """Smith, replicator or projection dynamics, optionally restricted to a graph."""
    p, x = _dims(p, x)
    n = x.size
    if graph is not None and graph.n != n:
        raise InvalidInputError(f"graph has {graph.n} nodes, state has {n} entries")
    # without a graph every switch is allowed, i.e. the complete graph
    adj = np.ones((n, n)) - np.eye(n) if graph is None else np.asarray(graph.adjacency)
    if model == "smith":
        gain = np.maximum(p[:, None] - p[None, :], 0.0) * adj  # [p_i - p_j]_+
        return gain @ x - x * gain.T.sum(axis=1)
    if model == "replicator":
        if x.min() < 0:
            raise DomainError("replicator dynamics needs a nonnegative state")
        return x * (p * (adj @ x) - adj @ (x * p))
    if model == "projection":
        _check_interior(x, floor)
        return p * adj.sum(axis=1) - adj @ p
    raise InvalidInputError(f"unknown closed-form model {model!r}")


# --- forward integration ---------------------------------------------------

def _rk4_generic(field_fn, x0, grid):
    dt = grid.dt
    X = np.empty((grid.n_nodes, x0.size))
    X[0] = x0
    for m in range(grid.M):
        t = grid.t0 + m * dt
        x = X[m]
        k1 = field_fn(t, x)
        k2 = field_fn(t + dt / 2, x + dt / 2 * k1)
        k3 = field_fn(t + dt / 2, x + dt / 2 * k2)
        k4 = field_fn(t + dt, x + dt * k3)
        nxt = np.clip(x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0, None)
        X[m + 1] = nxt / nxt.sum()
    return X


def kernel_scheme(kind: ProtocolKind, n: int):
    """(kind code, adjacency, floor) for the compiled loops, or None."""
    if isinstance(kind, SmithStatic):
        return 0, np.ones((n, n)) - np.eye(n), 1.0
    if isinstance(kind, OptimalPairwise):
        s = kind.scheme
        return s.kind_code, np.ascontiguousarray(s.adjacency(n), dtype=float), s.floor
    return None


def game_params(game: GameSpec):
    A, b, eps, delta = game.affine_log_params()
    return (np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(b, dtype=float),
            float(eps), float(delta))


def integrate_forward(kind: ProtocolKind, game: GameSpec, x0, grid: TimeGrid,
                      p_source: Optional[Trajectory] = None) -> Trajectory:
    """RK4 integration of dx/dt = V(p(t), x(t)) on ``grid``.

    ``p_source=None`` uses the myopic payoff p = F(x); a ``Trajectory`` is used
    as a frozen payoff path, interpolated linearly at the half-step stages.
    Each step is projected back onto the simplex.
    """
    x0 = as_vector(x0).astype(float)
    check_simplex(x0)
    n = x0.size
    if n != game.n:
        raise InvalidInputError(f"game has {game.n} strategies, x0 has {n}")
    if p_source is not None:
        if p_source.grid != grid:
            raise InvalidInputError(f"frozen payoff grid {p_source.grid} does not match {grid}")
        if p_source.n != n:
            raise InvalidInputError("frozen payoff dimension does not match the state")
    ks = kernel_scheme(kind, n)
    if ks is not None:
        A, b, eps, delta = game_params(game)
        static = p_source is None
        P = np.zeros((grid.n_nodes, n)) if static else np.ascontiguousarray(p_source.nodes)
        X = _kernels.forward(static, A, b, eps, delta, ks[0], ks[1], ks[2], x0, P, grid.dt, grid.M)
    else:
        if p_source is None:
            X = _rk4_generic(lambda t, x: ed_vector_field(kind, game.payoff(x), x), x0, grid)
        else:
            X = _rk4_generic(lambda t, x: ed_vector_field(kind, p_source(min(t, grid.T)), x), x0, grid)
    X[0] = x0
    bad = ~np.all(np.isfinite(X), axis=1)
    if bad.any():
        t_bad = grid.times[np.argmax(bad)]
        raise NumericalFailureError(f"forward integration produced non-finite states at t={t_bad:g}")
    return Trajectory(grid, X, is_state=True)
