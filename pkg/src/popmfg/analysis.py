"""Equilibrium oracle, game-property probes and trajectory diagnostics."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .agents import sample_transitions_per_agent, transition_matrix
from .core import (
    GameSpec,
    PopulationState,
    TimeGrid,
    Trajectory,
    WeightScheme,
    as_vector,
    check_simplex,
    evaluate_payoff,
)
from .errors import InvalidInputError, NoConvergenceError
from .hj import ValueTrajectory
from .protocols import (
    ClosedForm,
    OptimalPairwise,
    SmithStatic,
    ed_vector_field,
    integrate_forward,
    rate_matrix,
)
from .solver import SolverConfig, solve

NASH_T_MAX = 1e4
PC_TOL = 1e-10
FIELD_TOL = 1e-8


# --- Nash equilibria -------------------------------------------------------

def is_nash(game: GameSpec, x, tol: float) -> bool:
    """Every strategy with mass above ``tol`` earns the best payoff up to ``tol``."""
    x = as_vector(x)
    F = evaluate_payoff(game, x)
    best = F.max()
    return bool(np.all(F[x > tol] >= best - tol))


def nash_equilibrium(game: GameSpec, tol: float = 1e-8, x0=None, model: Optional[str] = None,
                     dt: float = 0.05, chunk: float = 50.0, t_max: float = NASH_T_MAX) -> PopulationState:
    """Approximate Nash equilibrium of a contractive game by long-run dynamics.

    Integrates Smith dynamics under the myopic payoff (or the closed-form
    ``model`` given, e.g. ``"projection"``) until the field drops below
    ``tol / 10``. Convergence is guaranteed for contractive games only.
    """
    n = game.n
    x = np.full(n, 1.0 / n) if x0 is None else as_vector(x0).astype(float)
    check_simplex(x)
    kind = SmithStatic() if model is None else ClosedForm(model)
    steps = max(2, int(round(chunk / dt)))
    t = 0.0
    target = tol / 10.0
    while t < t_max:
        traj = integrate_forward(kind, game, x, TimeGrid(0.0, steps * dt, steps))
        x = traj.nodes[-1].copy()
        t += steps * dt
        field = ed_vector_field(SmithStatic(), evaluate_payoff(game, x), x)
        if np.max(np.abs(field)) < target and is_nash(game, x, tol):
            return PopulationState(x)
    raise NoConvergenceError(f"no equilibrium within tolerance {tol:g} after t={t_max:g}")


# --- game probes -----------------------------------------------------------

@dataclass(frozen=True)
class ContractivenessProbe:
    contractive_margin: float
    strong_epsilon_estimate: float

    @property
    def contractive(self) -> bool:
        return self.contractive_margin <= 1e-12


def contractiveness_probe(game: GameSpec, n_samples: int = 1000, seed: int = 0) -> ContractivenessProbe:
    """Sampled check of (F(x) - F(y))'(x - y) <= -eps ||x - y||^2.

    Returns the largest sampled inner product and the largest eps consistent
    with every sample. This is an estimate from random Dirichlet pairs, not a
    certificate; estimates within 1e-12 of zero are reported as zero.
    """
    if n_samples < 2:
        raise InvalidInputError("need at least two samples")
    rng = np.random.default_rng(seed)
    X = rng.dirichlet(np.ones(game.n), size=n_samples)
    Y = rng.dirichlet(np.ones(game.n), size=n_samples)
    inner = np.empty(n_samples)
    quot = np.empty(n_samples)
    for k in range(n_samples):
        d = X[k] - Y[k]
        inner[k] = (evaluate_payoff(game, X[k]) - evaluate_payoff(game, Y[k])) @ d
        quot[k] = inner[k] / (d @ d)
    eps_hat = float(-quot.max())
    if eps_hat < 1e-12:
        eps_hat = 0.0
    return ContractivenessProbe(float(inner.max()), eps_hat)


# --- trajectory diagnostics --------------------------------------------------

@dataclass(frozen=True)
class CorrelationAudit:
    min_inner_product: float
    violations: int


def positive_correlation_audit(v_traj: Trajectory, x_traj: Trajectory,
                               scheme: WeightScheme) -> CorrelationAudit:
    if v_traj.grid != x_traj.grid:
        raise InvalidInputError("value and state trajectories live on different grids")
    protocol = OptimalPairwise(scheme)
    inner = np.empty(x_traj.grid.n_nodes)
    violations = 0
    for m in range(inner.size):
        p = v_traj.nodes[m]
        V = ed_vector_field(protocol, p, x_traj.nodes[m])
        inner[m] = p @ V
        if inner[m] < -PC_TOL and np.max(np.abs(V)) > FIELD_TOL:
            violations += 1
    return CorrelationAudit(float(inner.min()), violations)


@dataclass(frozen=True)
class StationaryDiagnostics:
    kappa: float
    max_form_residual: float


def stationary_diagnostics(game: GameSpec, x_star, v_traj: Trajectory,
                           tol: float = 1e-6) -> StationaryDiagnostics:
    """Compare v(t) with kappa (t - T) 1 + F(x*) at an interior equilibrium."""
    x_star = as_vector(x_star)
    if x_star.min() <= tol or not is_nash(game, x_star, tol):
        raise InvalidInputError("stationary diagnostics need an interior Nash equilibrium")
    F = evaluate_payoff(game, x_star)
    kappa = -float(F.mean())
    t = v_traj.grid.times
    form = kappa * (t - v_traj.grid.T)[:, None] + F[None, :]
    return StationaryDiagnostics(kappa, float(np.max(np.abs(v_traj.nodes - form))))


@dataclass(frozen=True)
class HorizonPoint:
    T: float
    midpoint_distance: float


def _worker_count():
    try:
        return max(1, int(os.environ.get("POPMFG_THREADS", "1")))
    except ValueError:
        return 1


def horizon_sweep(game: GameSpec, scheme: WeightScheme, x0, horizons: Sequence[float],
                  template: SolverConfig, x_star=None) -> List[HorizonPoint]:
    """Distance ||x(T/2) - x*|| of the solved state path for each horizon T.

    Each run reuses the template's t0, step size and iteration settings.
    """
    if x_star is None:
        x_star = nash_equilibrium(game)
    x_star = as_vector(x_star)
    g = template.grid

    def run(T):
        grid = TimeGrid.from_step(g.t0, T, g.dt)
        res = solve(game, scheme, x0, replace(template, grid=grid))
        mid = res.x_star(0.5 * (grid.t0 + grid.T))
        return HorizonPoint(float(T), float(np.linalg.norm(mid - x_star)))

    workers = min(_worker_count(), len(horizons))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, horizons))
    return [run(T) for T in horizons]


# --- Monte Carlo payoff functional -------------------------------------------

@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    stderr: float
    n_rollouts: int


def payoff_functional_estimate(game: GameSpec, scheme: WeightScheme, v_traj: Trajectory,
                               x_traj: Trajectory, start: int, n_rollouts: int, seed: int,
                               substeps: int = 1) -> PayoffEstimate:
    """Monte Carlo value of the finite-horizon payoff for agents starting at ``start``.

    Each rollout is a single agent switching with the optimal rates built from
    the frozen value path against the frozen state path. The running payoff
    -sum_j q_sj/2 rho_sj^2 + F_s(x) is integrated with the trapezoid rule; an
    agent that switches during a step is credited half a step in each strategy.
    ``substeps`` refines each grid interval by linear interpolation.
    """
    if v_traj.grid != x_traj.grid:
        raise InvalidInputError("value and state trajectories live on different grids")
    n = x_traj.n
    if not 0 <= start < n:
        raise InvalidInputError(f"start strategy {start} out of range")
    if n_rollouts < 1 or substeps < 1:
        raise InvalidInputError("need at least one rollout and one substep")
    g = x_traj.grid
    fine = TimeGrid(g.t0, g.T, g.M * substeps)
    tt = fine.times
    s_coarse = (tt - g.t0) / g.dt
    Xf = np.array([np.interp(s_coarse, np.arange(g.n_nodes), x_traj.nodes[:, i]) for i in range(n)]).T
    Vf = np.array([np.interp(s_coarse, np.arange(g.n_nodes), v_traj.nodes[:, i]) for i in range(n)]).T
    dt = fine.dt
    protocol = OptimalPairwise(scheme)

    def running(m):
        x, v = Xf[m], Vf[m]
        gap = np.maximum(v[None, :] - v[:, None], 0.0)
        return -0.5 * np.sum(scheme.conductance(x) * gap ** 2, axis=1) + evaluate_payoff(game, x)

    rng = np.random.default_rng(seed)
    s = np.full(n_rollouts, start, dtype=np.int64)
    total = np.zeros(n_rollouts)
    r_now = running(0)
    for m in range(fine.M):
        r_next = running(m + 1)
        xm = 0.5 * (Xf[m] + Xf[m + 1])
        vm = 0.5 * (Vf[m] + Vf[m + 1])
        P = transition_matrix(rate_matrix(protocol, vm, xm), dt)
        s_new = sample_transitions_per_agent(s, P[s], rng)
        total += 0.5 * dt * (r_now[s] + r_next[s_new])
        s = s_new
        r_now = r_next
    total += evaluate_payoff(game, Xf[-1])[s]
    stderr = float(total.std(ddof=1) / np.sqrt(n_rollouts)) if n_rollouts > 1 else float("nan")
    return PayoffEstimate(float(total.mean()), stderr, n_rollouts)
