import numpy as np
import pytest

from roamtrust import markov, topology


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture(scope="session")
def grid33():
    return topology.grid(3, 3)


@pytest.fixture(scope="session")
def grid33_P(grid33):
    return markov.lazy_transition_matrix(grid33)


@pytest.fixture(scope="session")
def grid33_mq(grid33_P):
    return markov.compute_markov_quantities(grid33_P)


def step_walkers(cums, dests, pos, rng):
    """Advance independent walkers one step with the shared inversion rule."""
    u = rng.random(len(pos))
    crows = cums[pos]
    k = np.sum(crows <= u[:, None], axis=1)
    np.minimum(k, cums.shape[1] - 1, out=k)
    return dests[pos, k]
