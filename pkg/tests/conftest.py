import numpy as np
import pytest

from manipgp.kinematics import ensure_m_max, load_model
from manipgp.scenario import resolve_data_path


def bundled_robot(name: str):
    return load_model(resolve_data_path(name, "robots", "."))


@pytest.fixture(scope="session")
def ur10():
    return ensure_m_max(bundled_robot("ur10_like"), 100_000, 0)


@pytest.fixture(scope="session")
def planar2():
    return ensure_m_max(bundled_robot("planar_2r"), 20_000, 0)


@pytest.fixture(scope="session")
def planar3():
    return ensure_m_max(bundled_robot("planar_3r"), 20_000, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def central_diff(f, x, h=1e-6):
    """Central differences of a vector function; columns index the inputs."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e.flat[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)
