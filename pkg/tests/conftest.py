import numpy as np
import pytest
from hypothesis import settings

from popmfg.core import MigrationGraph, congestion_game, rps_game

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SCHEME_KINDS = ("unit", "inverse_target_mass", "self_mass")


@pytest.fixture(scope="session")
def rps():
    return rps_game()


@pytest.fixture(scope="session")
def congestion():
    return congestion_game()


def random_interior(rng, n, lo=0.05):
    """Interior simplex point with every entry at least lo / n."""
    return (1 - lo) * rng.dirichlet(np.ones(n)) + lo / n


def random_connected_graph(rng, n, p_extra=0.3):
    adj = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):  # random spanning tree
        i, j = order[k], order[rng.integers(k)]
        adj[i, j] = adj[j, i] = 1
    extra = np.triu(rng.random((n, n)) < p_extra, 1)
    adj = np.maximum(adj, extra + extra.T)
    return MigrationGraph(adj)


def contractive_linear_game(rng, n):
    from popmfg.core import LinearGame
    B = rng.normal(size=(n, n))
    K = rng.normal(size=(n, n))
    return LinearGame(-(B @ B.T + 0.1 * np.eye(n)) + (K - K.T), rng.normal(size=n))


# acceptance criterion -> (passed, detail); printed in the terminal summary
ACCEPTANCE = {}


def record(number, title, ok, detail=""):
    ACCEPTANCE[(number, title)] = (bool(ok), title, detail)
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else "")
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[(number, title)]
        terminalreporter.write_line(
            f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else ""))
