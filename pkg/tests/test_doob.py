import numpy as np
import pytest

from qsdlab.spectral import (
    doob_spectral_gap, doob_transform, ergodic_limit, principal_eigenpair,
    semigroup_intertwining_check, spectral_gap,
)


def test_rows_sum_to_zero(chain_sweep):
    for g in chain_sweep:
        dg = doob_transform(g)
        scale = max(1.0, np.max(np.abs(dg.Qh)))
        assert np.max(np.abs(dg.Qh.sum(axis=1))) <= 1e-12 * scale


def test_transformed_detailed_balance(chain_sweep):
    for g in chain_sweep:
        dg = doob_transform(g)
        w = dg.mh[:, None] * dg.Qh
        scale = max(1.0, np.max(np.abs(w)))
        assert np.max(np.abs(w - w.T)) <= 1e-12 * scale


def test_transformed_mass_is_squared_ground_state(chain_sweep):
    for g in chain_sweep:
        pair = principal_eigenpair(g)
        dg = doob_transform(g, pair)
        np.testing.assert_allclose(dg.mh, g.m * pair.phi0**2, rtol=1e-12)


def test_gap_shifts_by_lambda0(chain_sweep):
    # the transform subtracts lambda0 from the whole spectrum, so the
    # transformed chain relaxes at exactly the original spectral gap
    for g in chain_sweep:
        assert doob_spectral_gap(doob_transform(g)) == pytest.approx(
            spectral_gap(g), rel=1e-9, abs=1e-11)


def test_intertwining_residual(chain_sweep):
    rng = np.random.default_rng(23)
    for g in chain_sweep:
        pair = principal_eigenpair(g)
        f = rng.standard_normal(g.n)
        assert semigroup_intertwining_check(g, pair, 3.0, f) <= 1e-9


def test_ergodic_convergence_rate(chain_sweep):
    rng = np.random.default_rng(29)
    for g in chain_sweep:
        dg = doob_transform(g)
        gap = doob_spectral_gap(dg)
        f = rng.standard_normal(g.n)
        t = 10.0 / gap
        evolved, mean = ergodic_limit(dg, f, t)
        bound = np.exp(-gap * t) * np.max(np.abs(f)) * 10.0
        assert np.max(np.abs(evolved - mean)) <= bound + 1e-13


def test_invariant_measure_is_fixed(chain_sweep):
    # mh is invariant for the conservative transformed chain
    for g in chain_sweep[:4]:
        dg = doob_transform(g)
        np.testing.assert_allclose(dg.mh @ dg.Qh, 0.0,
                                   atol=1e-12 * np.max(np.abs(dg.Qh)) * np.max(dg.mh))
