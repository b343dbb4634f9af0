"""Endpoint classification against closed-form Feller integrals.

For models where the attainability/entrance integrals have elementary
values, the certified values are compared against those; for the divergent
cases the verdicts are checked against the qualitative picture (explosive
outward drift reaches infinity, strong inward drift makes it unattainable
but enterable, and so on).
"""
import numpy as np
import pytest

from qsdlab.diffusion import Diffusion1D, endpoint_report, is_class_T


def _model(drift, interval, anchor=None, killing="0"):
    payload = {"interval": list(interval), "drift": drift, "killing": killing}
    if anchor is not None:
        payload["anchor"] = anchor
    return Diffusion1D.from_json(payload)


def _classes(d):
    return (endpoint_report(d, "left").boundary_class.value,
            endpoint_report(d, "right").boundary_class.value)


class TestCatalog:
    def test_brownian_unit_interval(self):
        d = _model("0", (0, 1))
        assert _classes(d) == ("regular", "regular")
        # anchor 1/2: both iterated integrals equal 1/4 exactly
        for side in ("left", "right"):
            rep = endpoint_report(d, side)
            assert rep.attainability.value == pytest.approx(0.25, rel=1e-10)
            assert rep.entrance.value == pytest.approx(0.25, rel=1e-10)
        ct = is_class_T(d)
        assert ct.class_T and ct.explosive

    def test_brownian_half_line(self):
        d = _model("0", (0, float("inf")), anchor=1.0)
        assert _classes(d) == ("regular", "natural")
        rep = endpoint_report(d, "left")
        # int_0^1 2(1-y) dy = 1 for both orders
        assert rep.attainability.value == pytest.approx(1.0, rel=1e-10)
        assert rep.entrance.value == pytest.approx(1.0, rel=1e-10)
        assert not is_class_T(d).class_T

    def test_restoring_linear_drift(self):
        d = _model("x", (float("-inf"), float("inf")))
        assert _classes(d) == ("natural", "natural")
        assert not is_class_T(d).class_T

    def test_radial_three_dimensional_bessel(self):
        d = _model("-1/x", (0, float("inf")), anchor=1.0)
        assert _classes(d) == ("entrance", "natural")
        rep = endpoint_report(d, "left")
        assert not rep.attainability.finite
        # int_0^1 (1/y - 1) 2 y^2 dy = 1/3
        assert rep.entrance.value == pytest.approx(1.0 / 3.0, rel=1e-9)


class TestStrongDrifts:
    """Superlinear drifts require the cancellation-free reordered march."""

    def test_inward_cubic_is_unattainable_but_enterable(self):
        d = _model("x^3", (float("-inf"), float("inf")))
        assert _classes(d) == ("entrance", "entrance")

    def test_outward_cubic_explodes(self):
        d = _model("-x^3", (float("-inf"), float("inf")))
        assert _classes(d) == ("exit", "exit")
        assert endpoint_report(d, "right").attainability.method == "reordered"
        ct = is_class_T(d)
        assert ct.class_T and ct.explosive

    def test_one_sided_quadratic(self):
        # drift coefficient x^2 restores on the right, expels on the left
        d = _model("x^2", (float("-inf"), float("inf")))
        assert _classes(d) == ("exit", "entrance")

    def test_inward_quintic(self):
        d = _model("x^5", (float("-inf"), float("inf")))
        assert _classes(d) == ("entrance", "entrance")

    def test_bessel_like_with_cubic_confinement(self):
        d = _model("1/(2*x) + x^3", (0, float("inf")), anchor=1.0)
        assert _classes(d) == ("exit", "entrance")
        assert is_class_T(d).class_T

    def test_bessel_like_with_linear_confinement_stays_natural(self):
        # linear confinement is too weak: the entrance integral toward
        # infinity diverges, so the right endpoint remains natural
        d = _model("1/(2*x) + x", (0, float("inf")), anchor=1.0)
        assert _classes(d) == ("exit", "natural")


class TestReportStructure:
    def test_results_are_cached_per_side(self):
        d = _model("0", (0, 1))
        assert endpoint_report(d, "left") is endpoint_report(d, "left")

    def test_killing_does_not_enter_classification(self):
        plain = _model("0", (0, 1))
        killed = _model("0", (0, 1), killing="5")
        assert _classes(plain) == _classes(killed)
        assert is_class_T(killed).killing_present

    def test_integrals_certify_with_positive_blocks(self):
        rep = endpoint_report(_model("0", (0, 1)), "left")
        assert rep.attainability.blocks > 0
        assert rep.attainability.finite
