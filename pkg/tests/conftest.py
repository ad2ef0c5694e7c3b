import pytest

from pdesolve import GridSpec, standard_bump
from shelattice import lattice_grid


@pytest.fixture
def small_grid():
    """dy = 0.05, dt = 0.005; init_epsilon resolved by the grid"""
    return GridSpec(y_min=-7.0, y_max=7.0, n_y=281, n_t=200, t_final=1.0, init_epsilon=0.01)


@pytest.fixture
def tiny_lattice():
    """dy = 0.1, 200 steps"""
    return lattice_grid(n_y=141, n_t=200)


@pytest.fixture
def bump():
    return standard_bump()
