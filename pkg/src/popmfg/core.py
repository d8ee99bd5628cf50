"""Domain types: population states, time grids, trajectories, games and weights.

Strategy indices are 0-based throughout the Python API.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, InvalidInputError, OutOfRangeError

SIMPLEX_TOL = 1e-9
DEFAULT_WEIGHT_FLOOR = 1e-8
DEFAULT_LOG_OFFSET = 1e-6


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def renormalize(x) -> np.ndarray:
    """Clip negative entries to zero and rescale so the entries sum to one."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    s = x.sum(axis=-1, keepdims=True)
    if np.any(s <= 0.0):
        raise DomainError("cannot renormalize a vector with no positive mass")
    return x / s


def check_simplex(x, tol: float = SIMPLEX_TOL) -> None:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidInputError(f"population state must be a vector of length >= 2, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("population state has non-finite entries")
    if x.min() < 0.0:
        raise InvalidInputError(f"population state has negative entry {x.min():.3e}")
    if abs(x.sum() - 1.0) > tol:
        raise InvalidInputError(f"population state sums to {x.sum():.12f}, not 1")


@dataclass(frozen=True, eq=False)
class PopulationState:
    """A point of the probability simplex."""

    masses: np.ndarray

    def __post_init__(self):
        check_simplex(self.masses)
        object.__setattr__(self, "masses", _frozen(self.masses))

    @classmethod
    def uniform(cls, n: int) -> "PopulationState":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_counts(cls, counts) -> "PopulationState":
        counts = np.asarray(counts, dtype=float)
        if counts.min() < 0 or counts.sum() <= 0:
            raise InvalidInputError("counts must be nonnegative with a positive total")
        return cls(counts / counts.sum())

    @classmethod
    def projected(cls, x) -> "PopulationState":
        return cls(renormalize(x))

    @property
    def n(self) -> int:
        return self.masses.size

    def __array__(self, dtype=None, copy=None):
        return self.masses if dtype is None else self.masses.astype(dtype)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, PopulationState) and np.array_equal(self.masses, other.masses)

    def __hash__(self):
        return hash(self.masses.tobytes())

    def __repr__(self):
        return f"PopulationState({np.array2string(self.masses, precision=6)})"


def as_vector(x) -> np.ndarray:
    if isinstance(x, PopulationState):
        return x.masses
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0 = t_0 < ... < t_M = T."""

    t0: float
    T: float
    M: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.T)):
            raise InvalidInputError("grid endpoints must be finite")
        if self.t0 < 0 or self.T <= self.t0:
            raise InvalidInputError(f"need T > t0 >= 0, got t0={self.t0}, T={self.T}")
        if int(self.M) != self.M or self.M < 2:
            raise InvalidInputError(f"need an integer M >= 2, got {self.M}")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "M", int(self.M))

    @classmethod
    def from_step(cls, t0: float, T: float, dt: float) -> "TimeGrid":
        if dt <= 0:
            raise InvalidInputError(f"time step must be positive, got {dt}")
        return cls(t0, T, max(2, int(round((T - t0) / dt))))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.M

    @property
    def n_nodes(self) -> int:
        return self.M + 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.M + 1)


class Trajectory:
    """Node values on a ``TimeGrid``, evaluated off-node by linear interpolation."""

    def __init__(self, grid: TimeGrid, nodes, is_state: bool = False):
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] != grid.n_nodes:
            raise InvalidInputError(
                f"expected {grid.n_nodes} nodes of equal length, got array of shape {nodes.shape}")
        if is_state:
            if nodes.min() < -SIMPLEX_TOL or np.max(np.abs(nodes.sum(axis=1) - 1.0)) > SIMPLEX_TOL:
                raise InvalidInputError("state trajectory leaves the simplex")
        nodes.setflags(write=False)
        self.grid = grid
        self.nodes = nodes
        self.is_state = is_state

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __call__(self, t: float) -> np.ndarray:
        return eval_trajectory(self, t)

    def __len__(self):
        return self.grid.n_nodes

    def __repr__(self):
        kind = "state" if self.is_state else "vector"
        return f"{type(self).__name__}({kind}, n={self.n}, grid={self.grid})"


def eval_trajectory(traj: Trajectory, t: float) -> np.ndarray:
    g = traj.grid
    if not (g.t0 <= t <= g.T):
        raise OutOfRangeError(f"t={t} outside [{g.t0}, {g.T}]")
    s = (t - g.t0) / g.dt
    nearest = int(round(s))
    if abs(s - nearest) <= 1e-10:
        return traj.nodes[nearest].copy()
    k = int(np.floor(s))
    theta = s - k
    return (1.0 - theta) * traj.nodes[k] + theta * traj.nodes[k + 1]


# --- games -----------------------------------------------------------------

class GameSpec:
    """Payoff function F on the simplex.

    Every builtin variant has the form ``F(x) = A x + b - eps * ln(x + delta)``;
    ``affine_log_params`` exposes that form to the compiled integrators.
    """

    name: str = "game"

    @property
    def n(self) -> int:
        raise NotImplementedError

    def payoff(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def affine_log_params(self):
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return evaluate_payoff(self, x)


@dataclass(frozen=True, eq=False)
class LinearGame(GameSpec):
    A: np.ndarray
    b: Optional[np.ndarray] = None
    name: str = "linear"

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise InvalidInputError(f"payoff matrix must be square with n >= 2, got {A.shape}")
        b = np.zeros(A.shape[0]) if self.b is None else np.asarray(self.b, dtype=float)
        if b.shape != (A.shape[0],):
            raise InvalidInputError(f"offset must have length {A.shape[0]}, got {b.shape}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def payoff(self, x):
        return self.A @ x + self.b

    def affine_log_params(self):
        return self.A, self.b, 0.0, 1.0


@dataclass(frozen=True, eq=False)
class EpsilonModifiedGame(GameSpec):
    """``F(x) - eps * ln(x + delta)``; makes a contractive game strongly contractive."""

    base: GameSpec
    epsilon: float
    delta: float = DEFAULT_LOG_OFFSET
    name: str = "epsilon_modified"

    def __post_init__(self):
        if not self.epsilon > 0 or not self.delta > 0:
            raise InvalidInputError("epsilon and delta must be positive")
        if isinstance(self.base, EpsilonModifiedGame) and self.base.delta != self.delta:
            raise InvalidInputError("nested log modifications need a common delta")

    @property
    def n(self) -> int:
        return self.base.n

    def payoff(self, x):
        shifted = x + self.delta
        if np.any(shifted <= 0):
            raise DomainError("log term undefined: some x_i + delta <= 0")
        return self.base.payoff(x) - self.epsilon * np.log(shifted)

    def affine_log_params(self):
        A, b, eps, _ = self.base.affine_log_params()
        return A, b, eps + self.epsilon, self.delta


CONGESTION_MATRIX = -np.array([
    [2.5, 1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 2.5, 1.0, 0.0, 0.5, 0.0],
    [0.0, 1.0, 2.5, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 2.5, 1.0, 0.0],
    [0.0, 0.5, 0.0, 1.0, 2.5, 1.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 2.5],
])

RPS_MATRIX = np.array([
    [0.0, -1.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 1.0, 0.0],
])


def congestion_game() -> LinearGame:
    """Six-route congestion game (two three-route corridors coupled via routes 2 and 5)."""
    return LinearGame(CONGESTION_MATRIX, name="congestion6")


def rps_game() -> LinearGame:
    return LinearGame(RPS_MATRIX, name="rps3")


def evaluate_payoff(game: GameSpec, x) -> np.ndarray:
    x = as_vector(x)
    if x.shape != (game.n,):
        raise InvalidInputError(f"game has {game.n} strategies, state has shape {x.shape}")
    return game.payoff(x)


# --- migration graphs and weights -----------------------------------------

@dataclass(frozen=True, eq=False)
class MigrationGraph:
    """Undirected connected graph of permitted strategy switches."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        n = adj.shape[0]
        if adj.ndim != 2 or adj.shape != (n, n) or n < 2:
            raise InvalidInputError(f"adjacency must be square with n >= 2, got {adj.shape}")
        if not np.all((adj == 0) | (adj == 1)):
            raise InvalidInputError("adjacency entries must be 0 or 1")
        if not np.array_equal(adj, adj.T):
            raise InvalidInputError("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise InvalidInputError("adjacency must have a zero diagonal")
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise InvalidInputError(f"migration graph is not connected ({n_comp} components)")
        object.__setattr__(self, "adjacency", _frozen(adj))

    @classmethod
    def complete(cls, n: int) -> "MigrationGraph":
        return cls(np.ones((n, n)) - np.eye(n))

    @classmethod
    def ring(cls, n: int) -> "MigrationGraph":
        adj = np.zeros((n, n))
        for i in range(n):
            adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1.0
        return cls(adj)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])


class _Forbidden:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FORBIDDEN"

    def __bool__(self):
        return False


FORBIDDEN = _Forbidden()

WEIGHT_KINDS = ("unit", "inverse_target_mass", "self_mass")


@dataclass(frozen=True)
class WeightScheme:
    """Revision-cost weights q_ij(x).

    ``unit``: q_ij = 1; ``inverse_target_mass``: q_ij = 1/x_j;
    ``self_mass``: q_ij = x_i. Masses are floored at ``floor`` wherever they
    would otherwise be divided by.
    """

    kind: str = "unit"
    graph: Optional[MigrationGraph] = None
    floor: float = DEFAULT_WEIGHT_FLOOR

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise InvalidInputError(f"unknown weight scheme {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if not self.floor > 0:
            raise InvalidInputError("weight floor must be positive")

    @property
    def kind_code(self) -> int:
        return WEIGHT_KINDS.index(self.kind)

    def adjacency(self, n: int) -> np.ndarray:
        if self.graph is None:
            return np.ones((n, n)) - np.eye(n)
        if self.graph.n != n:
            raise InvalidInputError(f"graph has {self.graph.n} nodes, state has {n} entries")
        return np.asarray(self.graph.adjacency)

    def conductance(self, x) -> np.ndarray:
        """Matrix of 1/q_ij(x), zero on the diagonal and on forbidden links."""
        x = as_vector(x)
        n = x.size
        m = np.maximum(x, self.floor)
        if self.kind == "unit":
            c = np.ones((n, n))
        elif self.kind == "inverse_target_mass":
            # 1/q_ij = x_j stays bounded, so no floor: empty strategies attract nobody
            c = np.broadcast_to(np.maximum(x, 0.0)[None, :], (n, n)).copy()
        else:
            c = np.broadcast_to(1.0 / m[:, None], (n, n)).copy()
        return c * self.adjacency(n)


def weight(scheme: WeightScheme, x, i: int, j: int) -> Union[float, _Forbidden]:
    x = as_vector(x)
    n = x.size
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputError(f"strategy index out of range for n={n}: ({i}, {j})")
    if i == j:
        raise InvalidInputError("weights are defined only for i != j")
    if scheme.graph is not None and scheme.adjacency(n)[i, j] == 0:
        return FORBIDDEN
    if scheme.kind == "unit":
        return 1.0
    if scheme.kind == "inverse_target_mass":
        return 1.0 / max(x[j], scheme.floor)
    return max(x[i], scheme.floor)
