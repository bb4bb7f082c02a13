import os

import numpy as np
import pytest

from orthoreg import synth
from orthoreg.graphio import graph_from_edges

DATA_ROOT = os.environ.get("ORTHOREG_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))


def dataset_dir(name: str) -> str:
    return os.path.join(DATA_ROOT, name)


def require_dataset(name: str) -> str:
    """Skip unless the canonical benchmark directory exists; the sandboxed
    build environment has no network access to fetch the public graphs."""
    path = dataset_dir(name)
    if not os.path.isdir(path):
        pytest.skip(
            f"benchmark dataset '{name}' not present under {DATA_ROOT} "
            f"(no network in the build environment); supply the canonical "
            f"directory to run this criterion"
        )
    return path


def finite_difference(f, x, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over every entry."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        grad[idx] = (f(xp) - f(xm)) / (2.0 * eps)
        it.iternext()
    return grad


def rel_err(analytic, numeric) -> float:
    analytic = np.asarray(analytic).ravel()
    numeric = np.asarray(numeric).ravel()
    denom = max(float(np.linalg.norm(numeric)), 1e-300)
    return float(np.linalg.norm(analytic - numeric)) / denom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ring8():
    return synth.ring_graph(8)


@pytest.fixture
def triangle():
    return graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def single_edge():
    return graph_from_edges(2, [(0, 1)])


@pytest.fixture(scope="session")
def synthetic_problem():
    return synth.synthetic_dataset(seed=0)
