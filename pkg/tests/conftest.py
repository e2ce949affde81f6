import numpy as np
import pytest
from hypothesis import settings

from hpcfault.ingest import Trace

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_trace(T=90, cores=(0, 1), node=("n_a", "n_b"), core=("c_a", "c_b"), seed=0, start=0):
    rng = np.random.default_rng(seed)
    return Trace(
        np.arange(start, start + T),
        tuple(node),
        rng.normal(size=(T, len(node))),
        tuple(cores),
        tuple(core),
        rng.normal(size=(T, len(cores), len(core))),
    )


@pytest.fixture
def trace():
    return random_trace()
