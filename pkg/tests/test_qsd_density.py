import numpy as np
import pytest

from qsdlab import errors
from qsdlab.diffusion import Diffusion1D, build_grid, qsd_density, tightness_profile

PI = np.pi


def test_ground_state_of_the_absorbed_interval(dbm_qsd):
    # density (1/2) sin x, bottom eigenvalue 1/2 — fully explicit model
    assert dbm_qsd.lambda0 == pytest.approx(0.5, abs=1e-5)
    l1 = np.trapezoid(np.abs(dbm_qsd.density - 0.5 * np.sin(dbm_qsd.x)), dbm_qsd.x)
    assert l1 <= 1e-3
    assert abs(np.trapezoid(dbm_qsd.density, dbm_qsd.x) - 1.0) < 1e-6


def test_density_vector_consistency(dbm_qsd):
    assert dbm_qsd.nu.nu.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(dbm_qsd.density >= 0)
    assert np.all(dbm_qsd.phi0 > 0)


def test_symmetry_of_the_symmetric_model(dbm_qsd):
    # the interval and drift are mirror symmetric about pi/2
    dens = dbm_qsd.density
    np.testing.assert_allclose(dens, dens[::-1], atol=1e-10)


def test_constant_killing_shifts_rate_not_shape(dirichlet_bm):
    shifted = Diffusion1D.from_json(
        {"interval": [0.0, PI], "drift": "0", "killing": "2"})
    a = qsd_density(dirichlet_bm, build_grid(dirichlet_bm, 300))
    b = qsd_density(shifted, build_grid(shifted, 300))
    assert b.lambda0 == pytest.approx(a.lambda0 + 2.0, abs=1e-10)
    np.testing.assert_allclose(b.density, a.density, atol=1e-11)


def test_natural_boundary_is_refused():
    d = Diffusion1D.from_json({"interval": [0.0, "inf"], "drift": "0",
                               "killing": "0", "anchor": 1.0})
    with pytest.raises(errors.NotClassT):
        qsd_density(d, None)


def test_nonexplosive_model_is_refused():
    # entrance at both ends and no killing: the process lives forever
    d = Diffusion1D.from_json({"interval": ["-inf", "inf"], "drift": "x^3",
                               "killing": "0"})
    with pytest.raises(errors.NotExplosive):
        qsd_density(d, None)


def test_tightness_sup_shrinks_with_growing_core(dbm_generator):
    g = dbm_generator
    sups = []
    for half_width in (50, 100, 150, 199):
        K = np.zeros(g.n, dtype=bool)
        mid = g.n // 2
        K[mid - half_width: mid + half_width] = True
        prof = tightness_profile(g, K)
        assert np.all(prof.vector >= -1e-12) and np.all(prof.vector <= 1.0 + 1e-12)
        sups.append(prof.sup)
    assert np.all(np.diff(sups) < 0)
