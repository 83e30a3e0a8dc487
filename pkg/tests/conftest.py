import numpy as np
import pytest

from qpsi.logic.encoding import PrivateSet
from qpsi.logic.run_config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def worked_two_party_sets():
    return [PrivateSet.from_values([1, 2, 3], 5), PrivateSet.from_values([1, 2, 4], 5)]


@pytest.fixture
def worked_three_party_sets():
    return [
        PrivateSet.from_values([1, 2, 5], 7),
        PrivateSet.from_values([2, 3], 7),
        PrivateSet.from_values([2, 4, 5], 7),
    ]


@pytest.fixture
def make_config():
    def factory(q=5, sets=(), **kwargs):
        return RunConfig(q=q, sets=[list(s) for s in sets], **kwargs)

    return factory


def random_private_sets(rng, q, m):
    sets = []
    for _ in range(m):
        size = int(rng.integers(0, q + 1))
        values = rng.choice(q, size=size, replace=False)
        sets.append(PrivateSet.from_values([int(v) for v in values], q))
    return sets


@pytest.fixture
def random_sets():
    return random_private_sets
