import math

import numpy as np
import pytest

from confsphere.conformal import HypothesisBounds, volume
from confsphere.errors import (DimensionError, HypothesisNotMetError, InvalidArgumentError,
                               RangeError, SelectionFailure)
from confsphere.fields import bump_family, constant, coordinate, parse_field
from confsphere.scenarios import collapse_sequence, perturbation_scenario
from confsphere.sphere import product_sphere_sampling
from confsphere.truncation import (constructive_lower_bound, dichotomy_experiment,
                                   essential_infimum, f_moment_bound_check,
                                   log_gradient_bound_check, power_l1_transfer_check,
                                   regular_value_select, truncate, truncation_w12_bound_check,
                                   truncation_weak_inequality_check,
                                   uniform_lower_bound_experiment, weighted_quantile)

OM3 = 2 * math.pi ** 2
U = 1 + 0.5 * coordinate(3, 0)


def test_truncation_idempotent_and_monotone(product3):
    p = product3.points
    t = truncate(U, 1.2)
    assert np.array_equal(truncate(t, 1.2).evaluate(p), t.evaluate(p))
    assert np.array_equal(truncate(t, 1.1).evaluate(p), truncate(U, 1.1).evaluate(p))
    assert np.all(truncate(U, 1.1).evaluate(p) <= t.evaluate(p))
    assert np.all(t.evaluate(p) <= U.evaluate(p))
    with pytest.raises(InvalidArgumentError):
        truncate(U, 0.0)


def test_log_gradient_bound(product3):
    rep = log_gradient_bound_check(U, 3.0, product3)
    assert rep.verdict and rep.rhs == pytest.approx(math.sqrt(3 * OM3))
    with pytest.raises(HypothesisNotMetError):
        log_gradient_bound_check(U, 0.75, product3)


def test_truncation_bounds(product3):
    t = truncate(U, 1.2)
    rep = truncation_w12_bound_check(t, 3.0, product3)
    assert rep.verdict
    assert rep.rhs == pytest.approx(1.2 * math.sqrt(4 * OM3))
    assert rep.details["band_measure"] < 0.01 * OM3
    for phi in bump_family(3):
        assert truncation_weak_inequality_check(t, phi, 3.0, product3).lhs >= -1e-3


def test_truncation_of_constant_below_level(product3):
    t = truncate(constant(3, 1.0), 2.0)
    rep = truncation_w12_bound_check(t, 0.75, product3)
    assert rep.lhs == pytest.approx(math.sqrt(OM3))


def test_regular_value_select(product3):
    K = regular_value_select([U], 1.2, product3)
    assert abs(K / 1.2 - 1) <= 0.1
    with pytest.raises(SelectionFailure):
        regular_value_select([U], 1.2, product3, floor=10.0)
    assert regular_value_select([constant(3, 1.0)], 1.5, product3) == pytest.approx(1.5)


def test_essential_infimum_semantics(product3):
    est = essential_infimum(U, product3)
    assert est.estimate >= est.minimum and est.gap >= 0
    assert est.estimate == pytest.approx(0.5, abs=0.05)
    assert set(est.hemispheres) == {"upper", "lower"}
    with pytest.raises(RangeError):
        essential_infimum(U, product3, q=0.5)
    assert weighted_quantile(np.array([3.0, 1.0, 2.0]), np.ones(3), 0.5) == 2.0


def test_power_transfer_high_dimension():
    s = product_sphere_sampling(5, 8)
    u_inf = constant(5, 1.0)
    u_j = parse_field("1 + 0.2*x0^2", 5)
    rep = power_l1_transfer_check(u_j, u_inf, 1.0, s)
    assert rep.verdict
    with pytest.raises(DimensionError):
        power_l1_transfer_check(U, constant(3, 1.0), 1.0, product_sphere_sampling(3, 8))


def test_constructive_lower_bound_terms(product3):
    u_inf = constant(3, 1.0)
    rep = constructive_lower_bound(u_inf, u_inf, np.linspace(0.05, 1.5, 30), OM3, 1.0, product3)
    assert rep.l1_term == 0 and rep.consistent
    assert rep.bound == pytest.approx(1.0 - rep.drift_term)
    with pytest.raises(RangeError):
        constructive_lower_bound(u_inf, u_inf, 2.0, OM3, 1.0, product3)


def test_uniform_lower_bound_on_perturbation(product3):
    seq = perturbation_scenario(3, amplitudes=[2.0 ** -j for j in range(1, 11)])
    V = max(volume(cf, product3) for cf in seq.factors)
    res = uniform_lower_bound_experiment([cf.u for cf in seq.factors], seq.limit.u, V, 1.0,
                                         product3, np.linspace(0.05, 1.5, 30))
    assert res["i0"] is not None and res["i0"] <= 8
    assert res["all_consistent"]


def test_dichotomy(product3):
    b = HypothesisBounds(V=2 * OM3, Lambda=2 * OM3 ** 0.5, alpha=0.5)
    col = dichotomy_experiment([cf.u for cf in collapse_sequence(3, 5).factors], product3,
                               bounds=b)
    assert col.classification == "collapse-to-zero"
    assert col.evidence["volume_lower_bound_violations"]
    assert col.evidence["consistent"]
    seq = perturbation_scenario(3)
    pos = dichotomy_experiment([cf.u for cf in seq.factors], product3, limit=seq.limit.u,
                               bounds=b)
    assert pos.classification == "positive-infimum"
    assert not pos.evidence["volume_lower_bound_violations"]


def test_f_moment_bound(product3):
    seq = perturbation_scenario(3)
    V = 1.01 * max(volume(cf, product3) for cf in seq.factors)
    rep = f_moment_bound_check([cf.f for cf in seq.factors], 1.0, V, product3)
    assert rep.verdict
    for row in rep.details["per_index"]:
        assert row["variance_integral"] <= row["poincare_rhs"] * (1 + 1e-6)
