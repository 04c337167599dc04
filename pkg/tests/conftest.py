import numpy as np
import pytest

from apgm import Frame, make_bba


@pytest.fixture
def occ_frame():
    return Frame(("occupied", "free"))


@pytest.fixture
def sem_frame():
    return Frame(("road", "marking", "blocked", "unknown"))


def random_bba(rng: np.random.Generator, frame: Frame):
    """Random valid BBA: Dirichlet over singletons plus the frame mass."""
    weights = rng.dirichlet(np.ones(len(frame) + 1))
    return make_bba(frame, weights[:-1])


def random_mass_rows(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """(n, k) singleton-mass rows with valid implicit frame mass."""
    return rng.dirichlet(np.ones(k + 1), size=n)[:, :k]
