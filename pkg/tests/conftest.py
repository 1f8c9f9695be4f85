import numpy as np
import pytest

from linwalk.model import BodyParams, StrideTiming, default_params


@pytest.fixture(scope="session")
def adult() -> BodyParams:
    return default_params("adult")


@pytest.fixture(scope="session")
def kid() -> BodyParams:
    return default_params("kid")


@pytest.fixture(scope="session")
def timing() -> StrideTiming:
    return StrideTiming(T_ds=0.3, T_ss=0.56)


def random_states(n: int, seed: int = 0) -> np.ndarray:
    """Bounded random augmented states with physical support side."""
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, 23))
    Q[:, 0:4] = rng.uniform(-0.5, 0.5, (n, 4))
    Q[:, 4:8] = rng.uniform(-1.0, 1.0, (n, 4))
    Q[:, 8:10] = rng.uniform(-0.3, 0.3, (n, 2))
    Q[:, 10:18] = rng.uniform(-20.0, 20.0, (n, 8))
    Q[:, 18:22] = rng.uniform(-30.0, 30.0, (n, 4))
    Q[:, 22] = rng.choice([-1.0, 1.0], n)
    return Q


@pytest.fixture(scope="session")
def adult_config(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("cfg") / "adult.yaml"
    path.write_text(
        "m1: 45.7\nm2: 12.15\nm3: 12.15\n"
        "z1: 0.89\nz2: 0.32\nz3: 0.36\nw: 0.20\ng: 9.81\n"
        "T_ds: 0.3\nT_ss: 0.56\n")
    return str(path)
