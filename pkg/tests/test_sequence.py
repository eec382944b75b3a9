import math

import numpy as np
import pytest
from scipy.optimize import brentq

from confsphere.conformal import HypothesisBounds, total_scalar_curvature
from confsphere.errors import HypothesisNotMetError, InvalidArgumentError, MissingBoundError
from confsphere.fields import bump_family, constant, coordinate, smooth_bump
from confsphere.scenarios import (FactorSequence, ScenarioSpec, perturbation_scenario,
                                  recommended_sampling, round_scenario)
from confsphere.sequence import (chebyshev_volume_bound, cj_bound, convergence_report,
                                 level_band_coarea, limit_weak_psc_check, perimeter_estimate,
                                 select_tau, singular_set_decompose, squared_difference)
from confsphere.sphere import sphere_volume

OM3 = 2 * math.pi ** 2
W = 1 - coordinate(3, 0)


@pytest.fixture(scope="module")
def spike():
    spec = ScenarioSpec("spike", 3, J=5)
    return spec.sequence(), recommended_sampling(spec)


def test_cj_bound_closed_form(product3):
    zero = constant(3, 0.0)
    assert cj_bound(zero, zero, product3) == 0.0
    a = 0.3
    # 2 a ||x0||_2 (a^2 int |grad x0|^2)^{1/2} = 2 a^2 omega sqrt(n) / (n+1)
    assert cj_bound(a * coordinate(3, 0), zero, product3) == pytest.approx(
        2 * a * a * OM3 * math.sqrt(3) / 4, rel=1e-6)


def test_level_band_coarea_geodesic_spheres(product3):
    assert level_band_coarea(W, 0.9, 1.1, product3) == pytest.approx(4 * math.pi * 0.2, rel=0.03)
    assert level_band_coarea(constant(3, 0.5), 0.9, 1.1, product3) == 0.0
    with pytest.raises(InvalidArgumentError):
        level_band_coarea(W, 1.0, 1.0, product3)


def test_perimeter_equator_and_off_level(product3):
    assert perimeter_estimate(W, 1.0, 0.05, product3) == pytest.approx(4 * math.pi, rel=0.05)
    # the level {x0 = 0.5} is a sphere of radius sin(pi/3)
    area = 4 * math.pi * 0.75
    assert perimeter_estimate(W, 0.5, 0.05, product3) == pytest.approx(area, rel=0.05)
    assert perimeter_estimate(constant(3, 0.3), 1.0, 0.05, product3) == 0.0
    with pytest.raises(InvalidArgumentError):
        perimeter_estimate(W, 1.0, 0.0, product3)


def test_coarea_consistency(product3):
    edges = np.linspace(0.4, 1.6, 13)
    d = (edges[1] - edges[0]) / 2
    total = sum(perimeter_estimate(W, (a + b) / 2, d, product3) * (b - a)
                for a, b in zip(edges[:-1], edges[1:]))
    assert total == pytest.approx(level_band_coarea(W, 0.4, 1.6, product3), rel=0.05)


def test_select_tau_bracket_and_degenerate(product3):
    sel = select_tau(W, 1.0, product3)
    # the minimum never exceeds the bracket average band_total / width
    assert sel.in_bracket and sel.perimeter <= sel.band_total / 0.5 + 1e-12
    # areas 4 pi (1 - (1 - tau)^2) grow on [1/2, 1]; the flattest level is the lowest band
    assert sel.tau < 0.6
    deg = select_tau(constant(3, 0.0), 0.0, product3)
    assert deg.tau == 0.0 and deg.perimeter == 0.0
    with pytest.raises(InvalidArgumentError):
        select_tau(W, -1.0, product3)


def test_chebyshev_cases(product3):
    c = constant(3, 0.5)
    vol, bound = chebyshev_volume_bound(c, 0.25, product3)
    assert vol == pytest.approx(OM3) and bound == pytest.approx(2 * OM3)
    vol, bound = chebyshev_volume_bound(c, 1.0, product3)
    assert vol == 0.0 and bound == pytest.approx(0.5 * OM3)
    with pytest.raises(InvalidArgumentError):
        chebyshev_volume_bound(c, 0.0, product3)


def test_spike_decomposition(spike):
    seq, s = spike
    reps = [singular_set_decompose(seq, j, "f", s) for j in range(5)]
    for r in reps:
        chk = r.checks()
        assert chk["tau_in_bracket"] and chk["chebyshev"] and chk["good_set_sup"]
        assert r.perimeter <= 1.05 * r.perimeter_cap
        assert r.bad_volume < r.chebyshev_bound
        # the spike centre carries w = 1 > tau, so it lies in Z_j
        assert r.tau < 1.0 and r.bad_mask.any()
    for a, b in zip(reps, reps[1:]):
        assert b.C < a.C and b.bad_volume <= a.bad_volume and b.perimeter <= a.perimeter


@pytest.mark.parametrize("j", [0, 1, 2])
def test_spike_perimeter_matches_radial_closed_form(spike, j):
    seq, s = spike
    r = singular_set_decompose(seq, j, "f", s)
    width = seq.parameters["widths"][j]
    half = (r.bracket[1] - r.bracket[0]) / 16  # half-width of one of 8 sub-bands

    def area(tau):
        sv = brentq(lambda x: smooth_bump(np.array([x]))[0] ** 2 - tau, 0, 1 - 1e-12)
        return 4 * math.pi * math.sin(sv * width) ** 2
    taus = np.linspace(r.tau - half, r.tau + half, 41)
    mean_area = float(np.mean([area(t) for t in taus]))
    assert r.perimeter == pytest.approx(mean_area, rel=0.05)


def test_identical_sequence_gives_empty_bad_set(product3_coarse):
    cf = round_scenario(3, 0.1)
    seq = FactorSequence([cf, cf], cf)
    r = singular_set_decompose(seq, 1, "f", product3_coarse)
    assert r.C == 0 and not r.bad_mask.any()
    assert r.good_g_volume == pytest.approx(math.exp(0.3) * OM3, rel=1e-9)


def test_u_variant_gating(product3):
    seq = perturbation_scenario(3)
    with pytest.raises(MissingBoundError):
        singular_set_decompose(seq, 0, "u", product3)
    R0 = total_scalar_curvature(seq.factors[0], product3).lhs
    b = HypothesisBounds(V=2 * OM3, Lambda=2 * OM3 ** 0.5, alpha=0.5, R0=R0)
    for j in (0, 3):
        ru = singular_set_decompose(seq, j, "u", product3, bounds=b)
        rf = singular_set_decompose(seq, j, "f", product3, bounds=b)
        assert ru.good_g_volume == pytest.approx(rf.good_g_volume, rel=0.02)
    tight = HypothesisBounds(V=2 * OM3, Lambda=1.0, alpha=0.5, R0=0.5 * R0)
    with pytest.raises(HypothesisNotMetError):
        singular_set_decompose(seq, 0, "u", product3, bounds=tight)
    with pytest.raises(InvalidArgumentError):
        singular_set_decompose(seq, 0, "w", product3)


def test_convergence_report(product3):
    seq = perturbation_scenario(3, amplitudes=[2.0 ** -j for j in range(1, 7)])
    rep = convergence_report(seq, product3, (1.0, 2.0, 6.0), bump_family(3, radii=(1.2,)))
    d = rep.distances[2.0]
    ratios = [b / a for a, b in zip(d, d[1:])]
    assert all(abs(r - 0.5) <= 0.05 for r in ratios)
    assert rep.flagged_exponents == [6.0]
    assert rep.decays(1.0) and rep.pairing_decay
    const = FactorSequence([seq.limit] * 3, seq.limit)
    zero = convergence_report(const, product3, (2.0,))
    assert zero.distances[2.0] == [0.0, 0.0, 0.0]
    assert "finite_family_weak_pairing_decay" in rep.to_dict()


def test_limit_weak_psc(product3):
    fam = bump_family(3)
    rep = limit_weak_psc_check(constant(3, 1.0), fam, product3)
    for phi, res in zip(fam, rep.details["residuals"]):
        assert res == pytest.approx(0.75 * float(product3.weights @ phi.evaluate(product3.points)))
    assert rep.verdict


def test_squared_difference_gradient(product3_coarse):
    a, b = 0.3 * coordinate(3, 0), constant(3, 0.0)
    w = squared_difference(a, b)
    p = product3_coarse.points[:50]
    exact = 2 * 0.09 * p[:, 0:1] * (np.eye(4)[0][None, :] - p[:, 0:1] * p)
    assert np.allclose(w.gradient(p), exact)
    assert sphere_volume(3) == pytest.approx(OM3)
