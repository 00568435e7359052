import numpy as np
import pytest
from hypothesis import settings

from bandspec.testkit import free_jacobi, seeded_operators

GOLDEN = (3 - np.sqrt(5)) / 2  # decaying root of mu^2 - 3 mu + 1

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def jacobi():
    return free_jacobi()


@pytest.fixture(scope="session")
def seeded():
    return seeded_operators()


@pytest.fixture(scope="session")
def jacobi_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("ops") / "jacobi.json"
    path.write_text('{"N":1,"r":1,"s":1,"kind":"constant",'
                    '"diagonals":{"-1":[[1,0]],"0":[[0,0]],"1":[[1,0]]}}')
    return str(path)

