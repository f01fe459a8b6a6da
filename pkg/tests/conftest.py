import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen.json").read_text())


@pytest.fixture(scope="session")
def solved_k1():
    """Verified realization for the benchmark at k = 1 (a few seconds)."""
    from adaptive_gainsched import example_system, synthesize

    res = synthesize(example_system(1.0))
    assert res.feasible, res.message
    return res


@pytest.fixture(scope="session")
def solved_k775():
    """Verified realization at k = 775, mu = 1e-11 (about half a minute)."""
    from adaptive_gainsched import example_system, synthesize

    return synthesize(example_system(775.0), mu=1e-11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
