import math

import numpy as np
import pytest
from scipy import integrate

from confsphere.errors import DimensionError, HypothesisNotMetError, RangeError
from confsphere.fields import ScalarField, constant, coordinate, parse_field
from confsphere.means import (ball_average_monotonicity_check, constants, drift_integral_ratio,
                              elementary_ratio_high, elementary_ratio_low,
                              lower_semicontinuity_probe, phi_derivative_identity_check,
                              phi_profile, pointwise_lower_bound_check, required_drift,
                              select_variant, spherical_mean_monotonicity_check,
                              superharmonic_power_check, target_field)
from confsphere.scenarios import bubble_scenario, concentration_point
from confsphere.sphere import basis_vector, radial_grid, sphere_volume, uniform_sphere_sampling

GRID500 = np.linspace(math.pi / 1000, math.pi / 2, 500)


@pytest.mark.parametrize("n", [3, 4, 5, 7])
def test_constants_independent_formulas(n):
    c = constants(n)
    om = sphere_volume(n - 1)
    sint, _ = integrate.quad(lambda s: math.sin(s) ** (n - 1), 0, math.pi / 2)
    assert c.C_f == pytest.approx(n / 2 * sint)
    assert c.c_low == pytest.approx(n * (n - 2) / 4 * (math.pi / 2) ** ((n + 2) / (2 * n))
                                    * om ** ((2 - n) / (2 * n)))
    assert c.c_high == pytest.approx(n / 2 * (math.pi / 2) ** (n - 1) * om ** (-1 / n))
    assert constants(3).C_f == pytest.approx(3 * math.pi / 8)


def test_constants_reject_low_dimension():
    with pytest.raises(DimensionError):
        constants(2)


def test_elementary_ratios():
    for n in (3, 4):
        rep = elementary_ratio_low(n, GRID500)
        assert rep.verdict and rep.lhs <= rep.rhs + 1e-9
    for n in range(3, 7):
        assert elementary_ratio_high(n, GRID500).verdict
    with pytest.raises(DimensionError):
        elementary_ratio_low(5, GRID500)


def test_variant_dispatch():
    assert select_variant(3) == "u"
    assert select_variant(5) == "power"
    assert select_variant(5, "f") == "f"
    with pytest.raises(DimensionError):
        select_variant(5, "u")
    u = parse_field("exp(x0)", 5)
    p = uniform_sphere_sampling(5, 10, 0).points
    assert np.allclose(target_field(u, "power").evaluate(p), np.exp(p[:, 0] * 2 / 3))
    assert np.allclose(target_field(u, "f").evaluate(p), p[:, 0] * 2 / 3)


def test_profile_of_coordinate_is_cosine():
    prof = phi_profile(coordinate(3, 0), basis_vector(3, 0), radial_grid(20), cap_count=None,
                       cap_resolution=4)
    assert np.allclose(prof.values, np.cos(prof.radii), atol=1e-12)


@pytest.mark.parametrize("r", [0.2, 0.8, 1.4])
def test_phi_derivative_identity_coordinate(r):
    rep = phi_derivative_identity_check(coordinate(3, 0), basis_vector(3, 0), r)
    assert rep.verdict
    assert rep.lhs == pytest.approx(-math.sin(r), rel=1e-5)
    assert rep.rhs == pytest.approx(-math.sin(r), rel=1e-4)


def test_phi_identity_radius_range():
    with pytest.raises(RangeError):
        phi_derivative_identity_check(coordinate(3, 0), basis_vector(3, 0), 1.7)


def test_monotonicity_on_bubble(product3):
    cf = bubble_scenario(3, 2.0)
    x = concentration_point(3)
    rep = spherical_mean_monotonicity_check(cf.u, None, x, radial_grid(24), product3, seed=1)
    assert rep.verdict
    need = required_drift(cf.u, "u", product3)
    with pytest.raises(HypothesisNotMetError):
        spherical_mean_monotonicity_check(cf.u, 0.5 * need, x, radial_grid(5), product3)


def test_f_variant_and_pointwise_bounds(product3):
    cf = bubble_scenario(3, 2.0)
    x = concentration_point(3)
    rep = ball_average_monotonicity_check(cf.u, None, x, 0.2, 0.6, product3, variant="f",
                                          cap_count=None, cap_resolution=8)
    assert rep.verdict and rep.details["ok"]
    assert rep.parameters["K"] == pytest.approx(constants(3).C_f)
    assert pointwise_lower_bound_check(cf.u, x, 0.5, product3, cap_count=None,
                                       cap_resolution=8).verdict
    assert pointwise_lower_bound_check(cf.u, -x, 0.5, product3, cap_count=None,
                                       cap_resolution=8).verdict


def test_superharmonic_power():
    u = 1 + 0.5 * coordinate(3, 0)
    probes = uniform_sphere_sampling(3, 300, 3).points
    assert superharmonic_power_check(u, 3.0, 0.5, probes).verdict
    with pytest.raises(HypothesisNotMetError):
        superharmonic_power_check(u, 0.75, 0.5, np.vstack([probes, -basis_vector(3, 0)]))
    with pytest.raises(RangeError):
        superharmonic_power_check(u, 3.0, 1.5, probes)


def test_lower_semicontinuity_probe():
    u = 1 + 0.5 * coordinate(3, 0)
    x = basis_vector(3, 1)
    radii = [0.4, 0.2, 0.1, 0.05, 0.02]
    rep = lower_semicontinuity_probe(u, x, 0.0, radii, cap_count=None, cap_resolution=6)
    assert rep.verdict
    assert rep.details["supremum"] == pytest.approx(u(x), abs=1e-3)

    # a change on the null set {x} is invisible to ball averages
    def spiked(p):
        v = u.evaluate(p)
        return np.where(np.all(np.isclose(p, x[None, :], atol=0), axis=1), 10.0, v)
    w = ScalarField(spiked, 3, smooth=False)
    rep2 = lower_semicontinuity_probe(w, x, 0.0, radii, cap_count=None, cap_resolution=6)
    assert w(x) == 10.0
    assert rep2.details["supremum"] == pytest.approx(rep.details["supremum"])
    assert rep2.details["gap_to_value"] == pytest.approx(10.0 - rep2.details["supremum"])
    assert rep2.details["gap_to_value"] > 8


def test_drift_integral_ratio_small_radius():
    # mean geodesic radius of B_r tends to n r / (n+1)
    assert drift_integral_ratio(3, 1e-3) == pytest.approx(0.75e-3, rel=1e-4)


def test_required_drift_constant_field(product3):
    u = constant(3, 1.0)
    c = constants(3)
    assert required_drift(u, "u", product3) == pytest.approx(c.c_low * (2 * math.pi ** 2) ** (1 / 6))
    assert required_drift(u, "f", None) == c.C_f
