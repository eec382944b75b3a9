import math

import numpy as np
import pytest

from confsphere.conformal import (CheckReport, ConformalFactor, HypothesisBounds, cap_probes,
                                  curvature_report, gradient_l2_bound_check, jsonable,
                                  region_volume, require_r0, round_scalar_curvature,
                                  scalar_curvature, total_scalar_curvature,
                                  uniform_integrability_audit, volume, w1q_bound,
                                  w1q_bound_check, weak_psc_residual,
                                  weighted_gradient_bound_check, weighted_gradient_rhs)
from confsphere.errors import InvalidArgumentError, MissingBoundError, RangeError
from confsphere.fields import bump_family, constant, coordinate, parse_field
from confsphere.sphere import basis_vector, uniform_sphere_sampling

OM3 = 2 * math.pi ** 2


def test_check_report_orientation():
    le = CheckReport("t", 3, 1.0, 2.0)
    assert le.slack == 1.0 and le.verdict
    ge = CheckReport("t", 3, 1.0, 2.0, relation=">=")
    assert ge.slack == -1.0 and not ge.verdict
    eq = CheckReport("t", 3, 1.0, 1.05, tolerance=0.1, relation="==")
    assert eq.verdict and eq.slack == pytest.approx(-0.05)
    assert not CheckReport("t", 3, 0.0, 1.0, details={"ok": False}).verdict
    d = le.to_dict()
    assert d["verdict"] == "pass" and d["relation"] == "<="


def test_jsonable_handles_special_values():
    out = jsonable({"a": np.float64(np.nan), "b": (np.int64(2), np.inf), "c": np.arange(2)})
    assert out == {"a": "nan", "b": [2, "inf"], "c": [0, 1]}


def test_hypothesis_bounds_validation():
    with pytest.raises(InvalidArgumentError):
        HypothesisBounds(V=1.0, Lambda=1.0, alpha=1.5)
    with pytest.raises(InvalidArgumentError):
        HypothesisBounds(V=-1.0, Lambda=1.0, alpha=0.5)
    with pytest.raises(MissingBoundError):
        require_r0(HypothesisBounds(V=1.0, Lambda=1.0, alpha=0.5))
    with pytest.raises(MissingBoundError):
        require_r0(None)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_constant_factor_curvature_and_volume(n, product3):
    c = -0.4
    cf = ConformalFactor(constant(n, c))
    p = uniform_sphere_sampling(n, 50, 0).points
    assert np.allclose(scalar_curvature(cf, p), n * (n - 1) * math.exp(-2 * c), rtol=1e-9)
    assert round_scalar_curvature(n) == n * (n - 1)
    if n == 3:
        assert volume(cf, product3) == pytest.approx(math.exp(3 * c) * OM3, rel=1e-12)


def test_total_scalar_curvature_constant_oracle(product3):
    c = 0.2
    rep = total_scalar_curvature(ConformalFactor(constant(3, c)), product3)
    assert rep.lhs == pytest.approx(6 * math.exp(c) * OM3, rel=1e-9)
    assert rep.verdict


def test_total_scalar_curvature_identity_perturbation(product3):
    cf = ConformalFactor(0.3 * coordinate(3, 0))
    rep = total_scalar_curvature(cf, product3)
    assert rep.verdict and rep.details["relative_discrepancy"] < 1e-6


def test_curvature_report_detects_negative():
    p = uniform_sphere_sampling(3, 200, 1).points
    assert curvature_report(ConformalFactor(0.3 * coordinate(3, 0)), p).nonnegative
    steep = ConformalFactor(parse_field("3*exp(5*x0)", 3))
    assert not curvature_report(steep, p).nonnegative


def test_region_volume(product3):
    hemi = parse_field("(abs(x0) + x0) / (2*abs(x0) + 1e-300)", 3)
    cf = ConformalFactor(constant(3, 0.0))
    assert region_volume(cf, hemi, product3) == pytest.approx(OM3 / 2, rel=1e-9)


def test_weak_psc_residual_constant(product3):
    u = constant(3, 1.0)
    for phi in bump_family(3):
        expected = 0.75 * float(product3.weights @ phi.evaluate(product3.points))
        assert weak_psc_residual(u, phi, product3) == pytest.approx(expected, rel=1e-12)


def test_gradient_bounds_on_perturbation(product3):
    a = 0.3
    cf = ConformalFactor(a * coordinate(3, 0))
    rep = gradient_l2_bound_check(cf, product3)
    # int |grad a x0|^2 = a^2 n omega / (n+1)
    assert rep.lhs == pytest.approx(a * a * 3 * OM3 / 4, rel=1e-6)
    assert rep.rhs == pytest.approx(6 * math.pi ** 2)
    V = 1.01 * volume(cf, product3)
    for p in (0.0, 0.25):
        assert weighted_gradient_bound_check(cf, p, V, product3).slack > 0
    assert w1q_bound_check(cf, 1.6, V, product3).slack > 0


def test_weighted_rhs_range():
    assert weighted_gradient_rhs(3, 0.0, OM3) == pytest.approx(3 * OM3)
    with pytest.raises(RangeError):
        weighted_gradient_rhs(3, 0.5, OM3)


def test_w1q_bound_regimes():
    V = 2 * OM3
    hi = w1q_bound(3, 1.6, V)
    assert hi["regime"] == "interpolated" and hi["theta"] == pytest.approx(0.25)
    expect = 0.5 ** 1.6 * weighted_gradient_rhs(3, 0.25, V) ** 0.8 * V ** 0.2
    assert hi["bound"] == pytest.approx(expect)
    lo = w1q_bound(3, 1.2, V)
    s = 1.2 / 0.8
    expect = 0.5 ** 1.2 * (3 * OM3) ** 0.6 * (V ** (s / 3) * OM3 ** (1 - s / 3)) ** 0.4
    assert lo["regime"] == "direct" and lo["bound"] == pytest.approx(expect)
    with pytest.raises(RangeError):
        w1q_bound(3, 12 / 7, V)


def test_uniform_integrability_round_passes():
    alpha = 0.5
    b = HypothesisBounds(V=OM3, Lambda=OM3 ** (1 - alpha) * 1.0001, alpha=alpha)
    probes = cap_probes(3, 3, (0.2, 1.0, 3.0), seed=0)
    rep = uniform_integrability_audit(ConformalFactor(constant(3, 0.0)), b, probes)
    assert rep.verdict and rep.details["violations"] == 0


def test_cap_probes_include_centers():
    c = basis_vector(3, 2)
    probes = cap_probes(3, 2, (0.1,), seed=0, centers=[c])
    assert any(np.allclose(x, c) for x, _ in probes)
