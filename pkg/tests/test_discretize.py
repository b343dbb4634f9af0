import numpy as np
import pytest

from qsdlab import errors
from qsdlab.diffusion import Diffusion1D, build_grid, discretize
from qsdlab.spectral import principal_eigenpair, validate_generator

PI = np.pi


def test_grid_layout(dirichlet_bm, dbm_grid):
    g = dbm_grid
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == pytest.approx(PI)
    assert (g.left_closure, g.right_closure) == ("dirichlet", "dirichlet")
    assert np.all(g.interior > 0) and np.all(g.interior < PI)
    assert len(g.interior) == g.n


def test_too_coarse_rejected(dirichlet_bm):
    with pytest.raises(errors.GridTooCoarse):
        build_grid(dirichlet_bm, 4)


def test_discretization_is_validated_reversible(dirichlet_bm, dbm_generator):
    # revalidation is a no-op if the structure contract really holds
    validate_generator(dbm_generator.Q, dbm_generator.m)
    off = dbm_generator.Q - np.diag(np.diag(dbm_generator.Q))
    band = np.triu(off, 2) + np.tril(off, -2)
    assert not np.any(band), "1D discretization must be tridiagonal"


def test_entrance_side_gets_reflecting_closure():
    d = Diffusion1D.from_json({"interval": [0.0, "inf"], "drift": "-1/x",
                               "killing": "1", "anchor": 1.0})
    g = build_grid(d, 64)
    assert g.left_closure == "noflux"


def test_infinite_side_is_truncated_where_speed_mass_dies():
    d = Diffusion1D.from_json({"interval": ["-inf", "inf"], "drift": "x^3",
                               "killing": "1"})
    g = build_grid(d, 64)
    assert np.isfinite(g.nodes).all()
    # the cubic well concentrates speed mass near the origin; cutoffs stay
    # within a modest multiple of the well width
    assert g.nodes[0] > -6 and g.nodes[-1] < 6


def test_eigenvalue_convergence_is_second_order(dirichlet_bm):
    # the graded mesh reaches its asymptotic rate around n ~ 300
    exact = 0.5
    errs = {}
    for n in (300, 400, 600, 800):
        g = discretize(dirichlet_bm, build_grid(dirichlet_bm, n))
        errs[n] = abs(principal_eigenpair(g).lambda0 - exact)
    for lo, hi in ((300, 600), (400, 800)):
        order = np.log2(errs[lo] / errs[hi])
        assert order > 1.8, (lo, hi, order)


def test_killing_enters_the_diagonal(dirichlet_bm, dbm_grid):
    plain = discretize(dirichlet_bm, dbm_grid)
    killed_model = Diffusion1D.from_json(
        {"interval": [0.0, PI], "drift": "0", "killing": "0.7"})
    killed = discretize(killed_model, build_grid(killed_model, 400))
    lam_plain = principal_eigenpair(plain).lambda0
    lam_killed = principal_eigenpair(killed).lambda0
    assert lam_killed == pytest.approx(lam_plain + 0.7, abs=1e-11)
