import numpy as np
import pytest

from relucells.arrangement import enumerate_cells, is_generic
from relucells.model import Dataset


@pytest.fixture
def ds3():
    """Fixed generic d=1 dataset with three points."""
    return Dataset(np.array([[-1.0], [0.2], [1.1]]), np.array([0.5, -0.4, 0.8]))


@pytest.fixture
def ds2():
    return Dataset(np.array([[-0.6], [0.9]]), np.array([0.7, -0.3]))


@pytest.fixture
def dec3(ds3):
    return enumerate_cells(ds3)


def random_generic_dataset(rng, n, d):
    while True:
        ds = Dataset(rng.normal(size=(n, d)), rng.normal(size=n))
        if is_generic(ds):
            return ds
