import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from qsdlab import errors
from qsdlab.spectral import (
    conditional_law, exp_lifetime_moment, feynman_kac_resolvent,
    perturbed_principal_eigenvalue, principal_eigenpair, qsd, resolvent,
    semigroup_apply, spectral_gap, survival_probability, uniqueness_check,
    validate_generator,
)

# symmetric 2x2 killed chain with a fully hand-computed spectrum:
# -Q has eigenvalues 1 (ground, phi = (1,1)/sqrt(2)) and 3
Q2 = np.array([[-2.0, 1.0], [1.0, -2.0]])
M2 = np.array([1.0, 1.0])


@pytest.fixture(scope="module")
def g2():
    return validate_generator(Q2, M2)


class TestValidate:
    def test_accepts_weighted_reversible(self):
        g = validate_generator(np.array([[-1.0, 1.0], [2.0, -2.0]]),
                               np.array([2.0, 1.0]))
        assert g.n == 2

    def test_rejects_broken_detailed_balance(self):
        with pytest.raises(errors.NonSymmetric):
            validate_generator(np.array([[-1.0, 1.0], [1.0, -1.0]]),
                               np.array([1.0, 2.0]))

    def test_rejects_negative_offdiagonal(self):
        with pytest.raises(errors.QsdLabError):
            validate_generator(np.array([[-1.0, -1.0], [-1.0, -1.0]]),
                               np.array([1.0, 1.0]))

    def test_rejects_positive_rowsum(self):
        with pytest.raises(errors.QsdLabError):
            validate_generator(np.array([[0.5, 1.0], [1.0, -2.0]]),
                               np.array([1.0, 1.0]))


class TestEigenpair:
    def test_hand_values(self, g2):
        pair = principal_eigenpair(g2)
        assert pair.lambda0 == pytest.approx(1.0, abs=1e-13)
        np.testing.assert_allclose(pair.phi0, [2**-0.5, 2**-0.5], rtol=1e-13)
        assert spectral_gap(g2) == pytest.approx(2.0, abs=1e-12)

    def test_positivity_and_normalization(self, chain_sweep):
        for g in chain_sweep:
            pair = principal_eigenpair(g)
            assert np.all(pair.phi0 > 0)
            assert np.sum(g.m * pair.phi0**2) == pytest.approx(1.0, rel=1e-12)

    def test_rayleigh_minimum(self, chain_sweep):
        rng = np.random.default_rng(5)
        for g in chain_sweep[:4]:
            lam = principal_eigenpair(g).lambda0
            for _ in range(5):
                u = rng.standard_normal(g.n)
                quot = -u @ (g.m[:, None] * g.Q) @ u / (g.m @ u**2)
                assert quot >= lam - 1e-10

    def test_eigen_residual(self, chain_sweep):
        for g in chain_sweep:
            pair = principal_eigenpair(g)
            resid = np.max(np.abs(-g.Q @ pair.phi0 - pair.lambda0 * pair.phi0))
            assert resid < 1e-11 * max(1.0, np.max(np.abs(g.Q)))


class TestSemigroup:
    def test_scalar_chain(self):
        g = validate_generator(np.array([[-3.0]]), np.array([1.0]))
        out = semigroup_apply(g, 0.7, np.array([2.0]))
        assert out[0] == pytest.approx(2.0 * np.exp(-2.1), rel=1e-13)

    def test_against_expm(self, chain_sweep):
        # scipy's Pade expm is an independent route to the same semigroup
        rng = np.random.default_rng(17)
        for g in chain_sweep:
            f = rng.standard_normal(g.n)
            ours = semigroup_apply(g, 0.7, f)
            ref = scipy.linalg.expm(0.7 * g.Q) @ f
            np.testing.assert_allclose(ours, ref, atol=1e-11 * np.max(np.abs(f)))

    def test_monotone_decay_from_qsd(self, g2):
        nu = qsd(g2)
        s = [survival_probability(g2, nu, t) for t in (0.5, 1.0, 2.0)]
        lam = principal_eigenpair(g2).lambda0
        for t, v in zip((0.5, 1.0, 2.0), s):
            assert v == pytest.approx(np.exp(-lam * t), rel=1e-12)


class TestResolvent:
    def test_conservative_identity(self):
        # no killing: (I - Q)^{-1} 1 = 1
        Q = np.array([[-1.0, 1.0], [2.0, -2.0]])
        g = validate_generator(Q, np.array([2.0, 1.0]))
        np.testing.assert_allclose(resolvent(g, 1.0, np.ones(2)), 1.0, rtol=1e-13)

    def test_solves_the_resolvent_equation(self, chain_sweep):
        rng = np.random.default_rng(3)
        for g in chain_sweep[:5]:
            f = rng.standard_normal(g.n)
            u = resolvent(g, 0.8, f)
            np.testing.assert_allclose(0.8 * u - g.Q @ u, f, atol=1e-10)


class TestFeynmanKacResolvent:
    def test_scalar_identity(self):
        # single state, kill rate k: ((0 - k + 1) + k... the shifted solve
        # with K = {0} returns phi0 back from phi0 * 1_K
        k = 2.5
        g = validate_generator(np.array([[-k]]), np.array([1.0]))
        pair = principal_eigenpair(g)
        out = feynman_kac_resolvent(g, [0], shift=pair.lambda0, beta=0.0,
                                    f=pair.phi0)
        np.testing.assert_allclose(out, pair.phi0, rtol=1e-13)

    def test_ground_state_reproduction(self, chain_sweep):
        for g in chain_sweep:
            pair = principal_eigenpair(g)
            mask = np.zeros(g.n, dtype=bool)
            mask[: g.n // 2] = True
            out = feynman_kac_resolvent(g, mask, shift=pair.lambda0, beta=0.0,
                                        f=pair.phi0 * mask)
            assert np.max(np.abs(out - pair.phi0)) <= 1e-10

    def test_not_positive_definite_reported(self, g2):
        # empty K at beta=0 makes the shifted matrix singular
        with pytest.raises(errors.NotPositiveDefinite):
            feynman_kac_resolvent(g2, np.zeros(2, dtype=bool),
                                  shift=principal_eigenpair(g2).lambda0,
                                  beta=0.0, f=np.ones(2))


class TestPerturbedEigenvalue:
    def test_strict_increase(self, chain_sweep):
        rng = np.random.default_rng(41)
        for g in chain_sweep:
            lam = principal_eigenpair(g).lambda0
            B = np.zeros(g.n, dtype=bool)
            B[rng.choice(g.n, size=rng.integers(1, g.n), replace=False)] = True
            assert perturbed_principal_eigenvalue(g, B) - lam > 1e-8

    def test_empty_set_is_identity(self, g2):
        lam = principal_eigenpair(g2).lambda0
        assert perturbed_principal_eigenvalue(g2, np.zeros(2, dtype=bool)) == lam


def _moment_by_quadrature(g, gamma, x):
    """Independent oracle: E_x e^{gamma zeta} = 1 + gamma int_0^inf
    e^{gamma t} P_x(zeta > t) dt with the survival read off scipy's expm."""
    def integrand(t):
        return np.exp(gamma * t) * (scipy.linalg.expm(t * g.Q) @ np.ones(g.n))[x]
    lam = principal_eigenpair(g).lambda0
    # e^{gamma t} P(zeta>t) <= C e^{-(lam-gamma) t}: cut where the bound dies
    T = 60.0 / (lam - gamma)
    val, err = scipy.integrate.quad(integrand, 0.0, T, limit=400,
                                    epsabs=1e-12, epsrel=1e-12)
    return 1.0 + gamma * val, err


class TestLifetimeMoments:
    def test_exponential_lifetime_closed_form(self):
        # one state, kill rate k: zeta ~ Exp(k), E e^{gamma zeta} = k/(k-gamma)
        k = 2.0
        g = validate_generator(np.array([[-k]]), np.array([1.0]))
        assert exp_lifetime_moment(g, 0.5, 0) == pytest.approx(k / (k - 0.5), rel=1e-13)

    def test_against_quadrature(self, chain_sweep):
        g = chain_sweep[0]
        lam = principal_eigenpair(g).lambda0
        gamma = 0.5 * lam
        ref, quad_err = _moment_by_quadrature(g, gamma, 3)
        assert quad_err < 1e-9
        assert exp_lifetime_moment(g, gamma, 3) == pytest.approx(ref, abs=1e-8)

    def test_rejected_at_lambda0(self, g2):
        lam = principal_eigenpair(g2).lambda0
        with pytest.raises(errors.GammaAtOrAboveLambda0):
            exp_lifetime_moment(g2, lam, 0)
        with pytest.raises(errors.GammaAtOrAboveLambda0):
            exp_lifetime_moment(g2, lam * 1.5, 0)

    def test_gamma_zero(self, g2):
        assert exp_lifetime_moment(g2, 0.0, 1) == 1.0


class TestQsdAndConditioning:
    def test_hand_qsd(self, g2):
        np.testing.assert_allclose(qsd(g2).nu, [0.5, 0.5], rtol=1e-13)

    def test_left_eigenvector_property(self, chain_sweep):
        for g in chain_sweep:
            nu = qsd(g).nu
            lam = principal_eigenpair(g).lambda0
            np.testing.assert_allclose(nu @ g.Q, -lam * nu, atol=1e-11)

    def test_fixed_point_of_conditioning(self, chain_sweep):
        for g in chain_sweep:
            nu = qsd(g)
            for t in (0.1, 1.0, 10.0):
                out = conditional_law(g, nu, t)
                assert np.max(np.abs(out.nu - nu.nu)) <= 1e-10

    def test_generic_start_converges_to_qsd(self, g2):
        init = np.array([0.9, 0.1])
        out = conditional_law(g2, init, 30.0)
        np.testing.assert_allclose(out.nu, qsd(g2).nu, atol=1e-11)


class TestUniqueness:
    def test_exactly_one_nonnegative_left_eigenvector(self, chain_sweep):
        for g in chain_sweep:
            rep = uniqueness_check(g)
            assert rep.nonnegative_count == 1
            assert rep.qsd_error <= 1e-10
