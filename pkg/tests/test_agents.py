import numpy as np
import pytest

from popmfg.agents import AgentPopulation, simulate, step, sup_distance, transition_matrix
from popmfg.core import LinearGame, TimeGrid, WeightScheme
from popmfg.errors import InvalidInputError, StepSizeError
from popmfg.protocols import SmithStatic, integrate_forward

GRID = TimeGrid(0.0, 6.0, 600)


def test_zero_rates_leave_population_unchanged():
    pop = AgentPopulation.from_counts([3, 4, 5], seed=0)
    new = step(pop, np.zeros((3, 3)), 0.1)
    assert np.array_equal(new.strategies, pop.strategies)


def test_forced_switch():
    pop = AgentPopulation.from_counts([50, 0], seed=3)
    new = step(pop, lambda i, j: 10.0 if (i, j) == (0, 1) else 0.0, 0.1)
    assert list(new.counts()) == [0, 50]


def test_step_determinism_and_immutability():
    pop = AgentPopulation.from_counts([500, 300, 200], seed=42)
    R = np.array([[0, 1.0, 2.0], [0.5, 0, 0], [0, 3.0, 0]])
    a, b = step(pop, R, 0.05), step(pop, R, 0.05)
    assert np.array_equal(a.strategies, b.strategies)
    assert a.rng_state == b.rng_state
    assert a.rng_state != pop.rng_state
    with pytest.raises(ValueError):
        pop.strategies[0] = 1


def test_step_size_error_names_bound():
    pop = AgentPopulation.from_counts([1, 1], seed=0)
    with pytest.raises(StepSizeError, match="at most 0.1"):
        step(pop, np.array([[0, 10.0], [0, 0]]), 0.2)


def test_transition_matrix_rows():
    P = transition_matrix(np.array([[0, 1.0, 2.0], [0.5, 0, 0], [0, 3.0, 0]]), 0.1)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    assert P.min() >= 0


def test_invalid_counts():
    with pytest.raises(InvalidInputError):
        AgentPopulation.from_counts([0, 0], 0)
    with pytest.raises(InvalidInputError):
        AgentPopulation.from_counts([1.5, 2], 0)


def test_agent_count_conserved(rps):
    traj = simulate(rps, WeightScheme(), [700, 200, 100], GRID, seed=1)
    counts = traj.nodes * 1000
    np.testing.assert_allclose(counts.sum(axis=1), 1000)
    np.testing.assert_allclose(counts, np.round(counts), atol=1e-9)


def test_simulation_determinism(rps):
    a = simulate(rps, WeightScheme(), [700, 200, 100], GRID, seed=9)
    b = simulate(rps, WeightScheme(), [700, 200, 100], GRID, seed=9)
    c = simulate(rps, WeightScheme(), [700, 200, 100], GRID, seed=10)
    assert a.nodes.tobytes() == b.nodes.tobytes()
    assert a.nodes.tobytes() != c.nodes.tobytes()


def test_single_agent(rps):
    traj = simulate(rps, WeightScheme(), [1, 0, 0], GRID, seed=0)
    assert np.all(np.isin(traj.nodes, [0.0, 1.0]))


def test_zero_payoff_game_is_constant():
    game = LinearGame(np.zeros((3, 3)))
    traj = simulate(game, WeightScheme(), [5, 3, 2], GRID, seed=0)
    assert np.all(traj.nodes == [0.5, 0.3, 0.2])


def test_mean_field_limit(rps):
    x0 = np.array([0.7, 0.2, 0.1])
    ode = integrate_forward(SmithStatic(), rps, x0, GRID)
    big = sup_distance(simulate(rps, WeightScheme(), [7000, 2000, 1000], GRID, seed=0), ode)
    small = sup_distance(simulate(rps, WeightScheme(), [70, 20, 10], GRID, seed=0), ode)
    assert big <= 0.05
    assert small >= 3 * big


def test_coarse_grid_raises(rps):
    game = LinearGame(50 * np.array([[0, -1.0, 1], [1, 0, -1], [-1, 1, 0]]))
    with pytest.raises(StepSizeError, match="refine"):
        simulate(game, WeightScheme(), [700, 200, 100], TimeGrid(0.0, 1.0, 10), seed=0)


def test_sup_distance_grid_mismatch(rps):
    a = simulate(rps, WeightScheme(), [1, 1, 1], TimeGrid(0.0, 1.0, 10), 0)
    b = simulate(rps, WeightScheme(), [1, 1, 1], TimeGrid(0.0, 1.0, 20), 0)
    with pytest.raises(InvalidInputError):
        sup_distance(a, b)
