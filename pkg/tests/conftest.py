import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

import vecrbd  # noqa: E402

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.differing_executors],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def arm():
    return vecrbd.chain7()


@pytest.fixture(scope="session")
def humanoid():
    return vecrbd.humanoid()


@pytest.fixture(scope="session")
def floating():
    return vecrbd.humanoid_floating()


@pytest.fixture(params=["chain7", "humanoid", "humanoid_floating"], scope="session")
def robot(request):
    return vecrbd.load_builtin(request.param)


@pytest.fixture(params=["jit", "numpy"])
def backend(request):
    with vecrbd.use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)
