import random

import pytest

from app.schemas.simnet import ClusterConfig
from app.services.simnet import Cluster


@pytest.fixture
def run_pes():
    def run(p, program, *inputs, **shared):
        return Cluster(ClusterConfig(p=p)).run(program, *inputs, **shared)

    return run


@pytest.fixture
def rnd():
    return random.Random(20240611)
