import numpy as np
import pytest

from qsdlab.backend import available_backends
from qsdlab.diffusion import Diffusion1D, build_grid, discretize, qsd_density
from qsdlab.sweeps import random_reversible_generator

PI = np.pi


@pytest.fixture(scope="session")
def dirichlet_bm():
    """Brownian motion on (0, pi) absorbed at both ends — the workhorse model
    with the fully explicit ground state sin(x), lambda0 = 1/2."""
    return Diffusion1D.from_json({"interval": [0.0, PI], "drift": "0", "killing": "0"})


@pytest.fixture(scope="session")
def dbm_grid(dirichlet_bm):
    return build_grid(dirichlet_bm, 400)


@pytest.fixture(scope="session")
def dbm_generator(dirichlet_bm, dbm_grid):
    return discretize(dirichlet_bm, dbm_grid)


@pytest.fixture(scope="session")
def dbm_qsd(dirichlet_bm, dbm_grid):
    return qsd_density(dirichlet_bm, dbm_grid)


@pytest.fixture(scope="session")
def chain_sweep():
    """Ten random reversible killed generators, n=20, for property checks.

    The acceptance tests rerun the same properties over the full
    hundred-generator sweep; these ten keep the unit suite quick.
    """
    return [random_reversible_generator(20, seed) for seed in range(10)]


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param
