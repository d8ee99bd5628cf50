import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from popmfg import _kernels
from popmfg.core import (
    LinearGame,
    MigrationGraph,
    TimeGrid,
    Trajectory,
    WeightScheme,
    evaluate_payoff,
    renormalize,
)
from popmfg.errors import DomainError, InvalidInputError
from popmfg.protocols import (
    ClosedForm,
    OptimalPairwise,
    SmithStatic,
    closed_form_field,
    ed_vector_field,
    integrate_forward,
    protocol_rate,
    rate_matrix,
)

from conftest import SCHEME_KINDS, random_connected_graph, random_interior

PAIRING = {"smith": "unit", "replicator": "inverse_target_mass", "projection": "self_mass"}

states_and_payoffs = st.integers(2, 6).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.floats(0, 1)).filter(lambda a: a.sum() > 1e-3),
    arrays(float, n, elements=st.floats(-10, 10)),
))


# --- rates -------------------------------------------------------------------

def test_rate_examples():
    unit = OptimalPairwise(WeightScheme("unit"))
    x = [0.5, 0.5]
    assert protocol_rate(unit, [0.0, 1.0], x, 0, 1) == 1.0
    assert protocol_rate(unit, [0.0, 1.0], x, 1, 0) == 0.0
    assert protocol_rate(unit, [3.0, 3.0], x, 0, 1) == 0.0
    assert protocol_rate(unit, [3.0, 3.0], x, 1, 0) == 0.0
    inv = OptimalPairwise(WeightScheme("inverse_target_mass"))
    assert protocol_rate(inv, [0.0, 2.0], x, 0, 1) == pytest.approx(1.0, abs=1e-15)


def test_rate_diagonal_invalid():
    with pytest.raises(InvalidInputError):
        protocol_rate(SmithStatic(), [0.0, 1.0], [0.5, 0.5], 0, 0)


def test_graph_forbidden_rate_is_zero():
    line = MigrationGraph(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))
    kind = OptimalPairwise(WeightScheme("unit", line))
    assert protocol_rate(kind, [0.0, 1.0, 5.0], np.full(3, 1 / 3), 0, 2) == 0.0
    assert protocol_rate(kind, [0.0, 1.0, 5.0], np.full(3, 1 / 3), 0, 1) == 1.0


def test_smith_static_ignores_scheme():
    p, x = np.array([0.3, -1.0, 2.0]), np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(rate_matrix(SmithStatic(), p, x),
                                  rate_matrix(OptimalPairwise(WeightScheme("unit")), p, x))


# --- fields ------------------------------------------------------------------

def test_smith_field_at_vertex(rps):
    x = np.array([1.0, 0.0, 0.0])
    V = ed_vector_field(SmithStatic(), evaluate_payoff(rps, x), x)
    np.testing.assert_array_equal(V, [-1.0, 1.0, 0.0])


def test_field_vanishes_at_nash(rps):
    x = np.full(3, 1 / 3)
    for kind in SCHEME_KINDS:
        V = ed_vector_field(OptimalPairwise(WeightScheme(kind)), evaluate_payoff(rps, x), x)
        assert np.max(np.abs(V)) < 1e-15


def test_closed_form_examples():
    assert np.all(closed_form_field("replicator", np.full(3, 2.0), [0.2, 0.3, 0.5]) == 0)
    np.testing.assert_allclose(closed_form_field("replicator", [1.0, 0.0], [0.5, 0.5]), [0.25, -0.25])
    for x in ([0.5, 0.5], [0.1, 0.9]):
        np.testing.assert_allclose(closed_form_field("projection", [2.0, 0.0], x), [2.0, -2.0])


def test_projection_needs_interior():
    with pytest.raises(DomainError):
        closed_form_field("projection", [1.0, 0.0, 0.0], [0.5, 0.5, 0.0])
    with pytest.raises(DomainError):
        ed_vector_field(ClosedForm("projection"), [1.0, 0.0, 0.0], [0.5, 0.5, 0.0])


def test_unknown_model():
    with pytest.raises(InvalidInputError):
        ClosedForm("logit")
    with pytest.raises(InvalidInputError):
        closed_form_field("bnn", [0.0, 1.0], [0.5, 0.5])


@pytest.mark.parametrize("model", sorted(PAIRING))
def test_pairwise_matches_closed_form(model):
    rng = np.random.default_rng(11)
    kind = OptimalPairwise(WeightScheme(PAIRING[model]))
    for _ in range(100):
        n = int(rng.integers(2, 8))
        x, p = random_interior(rng, n), rng.normal(size=n)
        np.testing.assert_allclose(ed_vector_field(kind, p, x), closed_form_field(model, p, x),
                                   rtol=0, atol=1e-12)


@pytest.mark.parametrize("model", sorted(PAIRING))
def test_pairwise_matches_closed_form_on_graphs(model):
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        graph = random_connected_graph(rng, n)
        kind = OptimalPairwise(WeightScheme(PAIRING[model], graph))
        x, p = random_interior(rng, n), rng.normal(size=n)
        np.testing.assert_allclose(ed_vector_field(kind, p, x), closed_form_field(model, p, x, graph),
                                   rtol=0, atol=1e-12)


@pytest.mark.parametrize("model", sorted(PAIRING))
def test_complete_graph_reduces_exactly(model):
    rng = np.random.default_rng(13)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        x, p = random_interior(rng, n), rng.normal(size=n)
        full = closed_form_field(model, p, x, MigrationGraph.complete(n))
        assert full.tobytes() == closed_form_field(model, p, x).tobytes()


@given(states_and_payoffs, st.sampled_from(SCHEME_KINDS))
def test_mass_conservation(xp, kind):
    raw, p = xp
    x = renormalize(raw)
    V = ed_vector_field(OptimalPairwise(WeightScheme(kind)), p, x)
    assert abs(V.sum()) <= 1e-12 * max(1.0, np.max(np.abs(V)))


@given(states_and_payoffs, st.sampled_from(SCHEME_KINDS))
def test_positive_correlation(xp, kind):
    raw, p = xp
    x = renormalize(raw)
    V = ed_vector_field(OptimalPairwise(WeightScheme(kind)), p, x)
    inner = p @ V
    assert inner >= -1e-10
    if np.max(np.abs(V)) > 1e-8:
        assert inner > 0


@given(states_and_payoffs, st.sampled_from(SCHEME_KINDS))
def test_kernel_field_matches_numpy(xp, kind):
    raw, p = xp
    x = renormalize(raw)
    scheme = WeightScheme(kind)
    C = np.empty((x.size, x.size))
    _kernels.conductance(scheme.kind_code, scheme.adjacency(x.size), scheme.floor, x, C)
    np.testing.assert_allclose(C, scheme.conductance(x), rtol=1e-15, atol=0)
    out = np.empty(x.size)
    _kernels.pairwise_field(C, p, x, out)
    np.testing.assert_allclose(out, ed_vector_field(OptimalPairwise(scheme), p, x), rtol=1e-12, atol=1e-12)


# --- forward integration ------------------------------------------------------

GRID = TimeGrid(0.0, 6.0, 600)


def test_forward_starts_at_x0_and_stays_on_simplex(rps, congestion):
    rng = np.random.default_rng(3)
    for game in (rps, congestion):
        for kind in [SmithStatic()] + [OptimalPairwise(WeightScheme(k)) for k in SCHEME_KINDS]:
            x0 = random_interior(rng, game.n)
            traj = integrate_forward(kind, game, x0, GRID)
            assert traj.is_state
            np.testing.assert_array_equal(traj.nodes[0], x0)
            assert traj.nodes.min() >= -1e-9
            assert np.max(np.abs(traj.nodes.sum(axis=1) - 1)) <= 1e-9


def test_forward_constant_at_nash(rps):
    x0 = np.full(3, 1 / 3)
    for kind in (SmithStatic(), OptimalPairwise(WeightScheme("self_mass")), ClosedForm("projection")):
        traj = integrate_forward(kind, rps, x0, GRID)
        assert np.max(np.abs(traj.nodes - x0)) <= 1e-8


def test_forward_constant_payoff_is_constant():
    game = LinearGame(np.zeros((3, 3)), np.ones(3))
    x0 = np.array([0.6, 0.3, 0.1])
    traj = integrate_forward(SmithStatic(), game, x0, GRID)
    np.testing.assert_allclose(traj.nodes, np.tile(x0, (GRID.n_nodes, 1)), rtol=0, atol=1e-15)


def test_smith_rps_spirals_inward(rps):
    x0 = np.array([0.7, 0.2, 0.1])
    x_star = np.full(3, 1 / 3)
    traj = integrate_forward(SmithStatic(), rps, x0, GRID)
    assert np.linalg.norm(traj.nodes[-1] - x_star) < np.linalg.norm(x0 - x_star)


def test_kernel_and_generic_paths_agree(rps):
    # smith via the compiled loop vs the closed form through the generic RK4
    x0 = np.array([0.7, 0.2, 0.1])
    a = integrate_forward(SmithStatic(), rps, x0, GRID)
    b = integrate_forward(ClosedForm("smith"), rps, x0, GRID)
    np.testing.assert_allclose(a.nodes, b.nodes, rtol=0, atol=1e-12)
    c = integrate_forward(OptimalPairwise(WeightScheme("inverse_target_mass")), rps, x0, GRID)
    d = integrate_forward(ClosedForm("replicator"), rps, x0, GRID)
    np.testing.assert_allclose(c.nodes, d.nodes, rtol=0, atol=1e-12)


def test_frozen_payoff_path(rps):
    P = Trajectory(GRID, np.tile([0.0, 1.0, 0.5], (GRID.n_nodes, 1)))
    x0 = np.array([0.5, 0.25, 0.25])
    traj = integrate_forward(SmithStatic(), rps, x0, GRID, p_source=P)
    assert traj.nodes[-1, 1] > 0.95  # everyone drifts to the best strategy
    b = integrate_forward(ClosedForm("smith"), rps, x0, GRID, p_source=P)
    np.testing.assert_allclose(traj.nodes, b.nodes, rtol=0, atol=1e-12)


def test_frozen_grid_mismatch(rps):
    P = Trajectory(TimeGrid(0.0, 6.0, 300), np.zeros((301, 3)))
    with pytest.raises(InvalidInputError):
        integrate_forward(SmithStatic(), rps, np.full(3, 1 / 3), GRID, p_source=P)


@pytest.mark.parametrize("kind", [ClosedForm("replicator"), OptimalPairwise(WeightScheme("inverse_target_mass"))])
def test_replicator_boundary_invariance(rps, congestion, kind):
    x0 = np.array([0.7, 0.0, 0.3])
    assert integrate_forward(kind, rps, x0, GRID).nodes[:, 1].max() <= 1e-9
    x0 = np.array([0.3, 0.0, 0.2, 0.0, 0.25, 0.25])
    nodes = integrate_forward(kind, congestion, x0, GRID).nodes
    assert nodes[:, [1, 3]].max() <= 1e-9


def test_forward_input_validation(rps):
    with pytest.raises(InvalidInputError):
        integrate_forward(SmithStatic(), rps, [0.5, 0.6, 0.1], GRID)
    with pytest.raises(InvalidInputError):
        integrate_forward(SmithStatic(), rps, [0.5, 0.5], GRID)
