"""Truncations min(u, K), regular levels, essential infima and the uniform
positive lower bound for factors with Delta u <= C u."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .conformal import CheckReport, HypothesisBounds, jsonable, uniform_integrability_audit
from .conformal import ConformalFactor, cap_probes
from .errors import (DimensionError, HypothesisNotMetError, InvalidArgumentError, RangeError,
                     SelectionFailure)
from .fields import DEFAULT_H, ScalarField, derivatives, gradients, integrate
from .means import constants, drift_integral_ratio
from .sphere import SphereSampling, ball_volume, sphere_volume


def _check_supersolution(u: ScalarField, C: float, pts: np.ndarray, h: float,
                         tol: float = 1e-6) -> float:
    """Largest relative excess of Delta u - C u at the points; raises if positive."""
    uv, _, ul = derivatives(u, pts, h)
    if np.any(uv <= 0):
        raise InvalidArgumentError("u must be positive")
    excess = float(np.max((ul - C * uv) / np.maximum(C * uv, 1e-12)))
    if excess > tol:
        raise HypothesisNotMetError(f"Delta u <= C u fails (relative excess {excess:.3g})")
    return excess


def _probe_points(sampling: SphereSampling, limit: int = 4096) -> np.ndarray:
    step = max(1, len(sampling) // limit)
    return sampling.points[::step]


def log_gradient_bound_check(u: ScalarField, C: float, sampling: SphereSampling,
                             h: float = DEFAULT_H) -> CheckReport:
    """||grad ln u||_{L^2} <= sqrt(C omega_n) when Delta u <= C u."""
    n = u.n
    excess = _check_supersolution(u, C, _probe_points(sampling), h)
    pts = sampling.points
    g = gradients(u, pts, h)
    uv = u.evaluate(pts)
    lhs = math.sqrt(float(sampling.weights @ (np.sum(g * g, axis=1) / uv ** 2)))
    return CheckReport("log-gradient-bound", n, lhs, math.sqrt(C * sphere_volume(n)),
                       anchor="||grad ln u||_2 <= sqrt(C omega_n) when Delta u <= C u",
                       parameters={"C": C, "h": h}, sampling=sampling.descriptor(),
                       details={"supersolution_excess": excess})


# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TruncatedFactor:
    """min(u, K) for a positive source field u.

    Derivatives near the kink {u = K} are unreliable, so gradients are
    evaluated only outside the band |u - K| < band_factor * h * |grad u|.
    """

    source: ScalarField
    K: float
    band_factor: float = 5.0

    def __post_init__(self):
        if not self.K > 0:
            raise InvalidArgumentError("truncation level K must be positive")

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def field(self) -> ScalarField:
        K = self.K
        return ScalarField(lambda p: np.minimum(self.source.evaluate(p), K), self.n,
                           smooth=False, name=f"min({self.source.name},{K:g})")

    def evaluate(self, points) -> np.ndarray:
        return self.field.evaluate(points)

    def gradient_split(self, points, h: float = DEFAULT_H):
        """Values of u, gradient of the truncation, and the band mask."""
        pts = np.atleast_2d(points)
        uv = self.source.evaluate(pts)
        g = gradients(self.source, pts, h)
        gn = np.linalg.norm(g, axis=1)
        delta = self.band_factor * h * gn
        below = uv < self.K - delta
        band = np.abs(uv - self.K) <= delta
        return uv, g * below[:, None], band


def truncate(u, K: float) -> TruncatedFactor:
    """min(u, K); truncating a truncation keeps the lower level."""
    if not K > 0:
        raise InvalidArgumentError("truncation level K must be positive")
    if isinstance(u, TruncatedFactor):
        return TruncatedFactor(u.source, min(u.K, float(K)), u.band_factor)
    return TruncatedFactor(u, float(K))


def truncation_w12_bound_check(t: TruncatedFactor, C: float, sampling: SphereSampling,
                               h: float = DEFAULT_H, verify: bool = True) -> CheckReport:
    """||min(u, K)||_{W^{1,2}} <= K sqrt((1 + C) omega_n), band-excluded gradient."""
    n = t.n
    if verify:
        _check_supersolution(t.source, C, _probe_points(sampling), h)
    pts = sampling.points
    uv, g, band = t.gradient_split(pts, h)
    tv = np.minimum(uv, t.K)
    l2 = float(sampling.weights @ tv ** 2)
    grad2 = float(sampling.weights @ (np.sum(g * g, axis=1) * ~band))
    lhs = math.sqrt(l2 + grad2)
    return CheckReport("truncation-w12-bound", n, lhs, t.K * math.sqrt((1 + C) * sphere_volume(n)),
                       anchor="||min(u,K)||_{W^{1,2}} <= K sqrt((1+C) omega_n)",
                       parameters={"K": t.K, "C": C, "h": h}, sampling=sampling.descriptor(),
                       details={"l2_squared": l2, "gradient_squared": grad2,
                                "band_measure": float(sampling.weights @ band)})


def truncation_weak_inequality_check(t: TruncatedFactor, phi: ScalarField, C: float,
                                     sampling: SphereSampling, h: float = DEFAULT_H,
                                     tol: float = 1e-3) -> CheckReport:
    """C int phi min(u,K) + int <grad phi, grad min(u,K)> >= 0, band excluded."""
    pts = sampling.points
    phi_v = phi.evaluate(pts)
    if np.any(phi_v < 0):
        raise InvalidArgumentError("test function must be nonnegative")
    uv, g, band = t.gradient_split(pts, h)
    tv = np.minimum(uv, t.K)
    pairing = np.sum(gradients(phi, pts, h) * g, axis=1) * ~band
    residual = float(sampling.weights @ (C * phi_v * tv + pairing))
    return CheckReport("truncation-weak-inequality", t.n, residual, 0.0, tolerance=tol,
                       relation=">=",
                       anchor="-int <grad phi, grad min(u,K)> <= C int phi min(u,K)",
                       parameters={"K": t.K, "C": C, "h": h, "test_function": phi.name},
                       sampling=sampling.descriptor(),
                       details={"band_measure": float(sampling.weights @ band)})


def regular_value_select(us: Sequence[ScalarField], K_target: float,
                         sampling: SphereSampling, h: float = DEFAULT_H,
                         eps: float = 0.01, band: float | None = None,
                         floor: float = 1e-3, max_shift: float = 0.1) -> float:
    """A level near ``K_target`` that every field crosses transversally or misses.

    Levels K_target (1 + k eps), k = 0, 1, -1, 2, -2, ... are tried in turn.
    A level is accepted when every sample point with |u - K| < band has
    |grad u| > floor. Raises :class:`SelectionFailure` when no level within
    ``max_shift`` relative distance qualifies.
    """
    pts = sampling.points
    cache = []
    for u in us:
        cache.append((u.evaluate(pts), np.linalg.norm(gradients(u, pts, h), axis=1)))
    kmax = int(round(max_shift / eps))
    order = [0] + [s * k for k in range(1, kmax + 1) for s in (1, -1)]
    for k in order:
        K = K_target * (1.0 + k * eps)
        b = band if band is not None else max(1e-3, 0.01 * abs(K))
        ok = True
        for vals, gn in cache:
            near = np.abs(vals - K) < b
            if np.any(near) and gn[near].min() <= floor:
                ok = False
                break
        if ok and K > 0:
            return float(K)
    raise SelectionFailure(f"no regular level within {max_shift:.0%} of {K_target:g}")


# ---------------------------------------------------------------------------

@dataclass
class InfimumEstimate:
    """Lower q-quantile of a field under the sampling's volume weights.

    A quantile never falls below the sample minimum, so ``gap`` =
    estimate - minimum is reported as the quantile's distance from it.
    """

    name: str
    q: float
    estimate: float
    minimum: float
    count: int
    seed: int | None
    hemispheres: dict = dc_field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.estimate - self.minimum

    def to_dict(self) -> dict:
        return jsonable({"field": self.name, "q": self.q, "estimate": self.estimate,
                         "minimum": self.minimum, "gap": self.gap, "count": self.count,
                         "seed": self.seed, "hemispheres": self.hemispheres})


def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    order = np.argsort(values, kind="stable")
    cw = np.cumsum(weights[order])
    k = int(np.searchsorted(cw, q * cw[-1], side="left"))
    return float(values[order][min(k, values.size - 1)])


def essential_infimum(field: ScalarField, sampling: SphereSampling, q: float = 1e-3,
                      values: np.ndarray | None = None) -> InfimumEstimate:
    """Quantile proxy for the essential infimum, with per-hemisphere estimates
    (split by the sign of x0)."""
    if not 0.0 < q <= 0.01:
        raise RangeError(f"q must lie in (0, 0.01], got {q}")
    vals = field.evaluate(sampling.points) if values is None else np.asarray(values, float)
    w = sampling.weights
    upper = sampling.points[:, 0] >= 0
    hemi = {}
    for name, mask in (("upper", upper), ("lower", ~upper)):
        if np.any(mask):
            hemi[name] = weighted_quantile(vals[mask], w[mask], q)
    return InfimumEstimate(field.name, q, weighted_quantile(vals, w, q), float(vals.min()),
                           int(vals.size), sampling.seed, hemi)


# ---------------------------------------------------------------------------

def power_l1_transfer_check(u_j: ScalarField, u_inf: ScalarField, e_inf: float,
                            sampling: SphereSampling, tol: float = 1e-12) -> CheckReport:
    """||u_j - u_inf||_1 >= e^{(n-4)/(n-2)} ||u_j^{2/(n-2)} - u_inf^{2/(n-2)}||_1, n >= 5.

    Factoring a^{n-2} - b^{n-2} with a, b the (n-2)-th roots leaves n-2
    terms; two of them give (a+b) b^{n-4} >= (a+b) e^{(n-4)/(n-2)}. The
    variant with exponent (n-3)/2 is evaluated too and reported alongside.
    """
    n = u_j.n
    if n < 5:
        raise DimensionError("the power transfer inequality is stated for n >= 5")
    pts = sampling.points
    a, b = u_j.evaluate(pts), u_inf.evaluate(pts)
    if np.min(b) < e_inf * (1 - 1e-9):
        raise HypothesisNotMetError("e_inf exceeds the sampled infimum of u_inf")
    k = 2.0 / (n - 2)
    lhs = float(sampling.weights @ np.abs(a - b))
    power = float(sampling.weights @ np.abs(a ** k - b ** k))
    rhs = e_inf ** ((n - 4) / (n - 2)) * power
    alt = e_inf ** ((n - 3) / 2) * power
    return CheckReport("power-l1-transfer", n, lhs, rhs, tolerance=tol, relation=">=",
                       anchor="||u_j-u_inf||_1 >= e^{(n-4)/(n-2)} ||u_j^{2/(n-2)}-u_inf^{2/(n-2)}||_1",
                       parameters={"e_inf": e_inf}, sampling=sampling.descriptor(),
                       details={"power_difference_l1": power, "rhs_exponent_half": alt,
                                "holds_with_exponent_half": bool(lhs >= alt - tol)})


@dataclass
class LowerBoundReport:
    n: int
    index: int
    r1: float
    e_inf: float
    l1_term: float
    drift_term: float
    variant: str
    sampled_min: float

    @property
    def bound(self) -> float:
        return self.e_inf - self.l1_term - self.drift_term

    @property
    def consistent(self) -> bool:
        return self.sampled_min >= self.bound - 1e-12

    @property
    def certified(self) -> bool:
        return self.bound >= self.e_inf / 4

    def to_dict(self) -> dict:
        return jsonable({"index": self.index, "r1": self.r1, "e_inf": self.e_inf,
                         "l1_term": self.l1_term, "drift_term": self.drift_term,
                         "bound": self.bound, "sampled_min": self.sampled_min,
                         "variant": self.variant, "consistent": self.consistent,
                         "certified": self.certified})


def constructive_lower_bound(u_i: ScalarField, u_inf: ScalarField, r1, V: float,
                             e_inf: float, sampling: SphereSampling,
                             probes: np.ndarray | None = None, index: int = 0) -> LowerBoundReport:
    """u_i(x) >= e - ||u_i - u_inf||_1 / Vol(B_r1) - c V^k <s>_{r1} for every x.

    For n in {3, 4}: e = e_inf, c = c_low, k = (n-2)/(2n), applied to u.
    For n >= 5 the same argument runs on v = u^{2/(n-2)}: e = e_inf^{2/(n-2)},
    c = c_high, k = 1/n. ``<s>_{r1}`` is the mean geodesic radius of B_r1.
    ``r1`` may be a grid; the radius giving the largest bound is kept.
    """
    n = u_i.n
    consts = constants(n)
    pts = sampling.points
    a, b = u_i.evaluate(pts), u_inf.evaluate(pts)
    if n in (3, 4):
        variant, e, c, k = "u", e_inf, consts.c_low, (n - 2) / (2 * n)
    else:
        p = 2.0 / (n - 2)
        variant, e, c, k = "power", e_inf ** p, consts.c_high, 1.0 / n
        a, b = a ** p, b ** p
    l1 = float(sampling.weights @ np.abs(a - b))
    radii = np.atleast_1d(np.asarray(r1, dtype=float))
    if np.any(radii <= 0) or np.any(radii >= math.pi / 2):
        raise RangeError("r1 must lie in (0, pi/2)")
    best = None
    for r in radii:
        l1_term = l1 / ball_volume(n, float(r))
        drift = c * V ** k * drift_integral_ratio(n, float(r))
        if best is None or l1_term + drift < best[1] + best[2]:
            best = (float(r), l1_term, drift)
    probe_pts = pts if probes is None else np.atleast_2d(probes)
    vals = u_i.evaluate(probe_pts)
    if variant == "power":
        vals = vals ** (2.0 / (n - 2))
    return LowerBoundReport(n, index, best[0], e, best[1], best[2], variant, float(vals.min()))


def uniform_lower_bound_experiment(seq_u: Sequence[ScalarField], u_inf: ScalarField, V: float,
                                   e_inf: float, sampling: SphereSampling, r1_grid,
                                   probes: np.ndarray | None = None) -> dict:
    """Run the constructive bound along a sequence and locate i0: the first
    index from which every bound certifies u_i >= e_inf / 4 (or the power
    analogue) and the sampled minimum agrees."""
    reports = [constructive_lower_bound(u, u_inf, r1_grid, V, e_inf, sampling, probes, i)
               for i, u in enumerate(seq_u)]
    i0 = None
    for i in range(len(reports)):
        if all(r.certified and r.consistent and r.sampled_min >= r.e_inf / 4
               for r in reports[i:]):
            i0 = i
            break
    return {"i0": i0, "reports": [r.to_dict() for r in reports],
            "all_consistent": all(r.consistent for r in reports)}


# ---------------------------------------------------------------------------

@dataclass
class DichotomyReport:
    classification: str
    evidence: dict

    def to_dict(self) -> dict:
        return jsonable({"classification": self.classification, "evidence": self.evidence})


def dichotomy_experiment(us: Sequence[ScalarField], sampling: SphereSampling,
                         h: float = DEFAULT_H, limit: ScalarField | None = None,
                         bounds: HypothesisBounds | None = None, q: float = 1e-3,
                         tol: float = 1e-6, collapse_ratio: float = 0.25,
                         probes: Sequence[tuple] | None = None) -> DichotomyReport:
    """Positive essential infimum of the limit, or collapse to zero.

    With ``limit`` the call is made on its essential infimum. Without it the
    last term stands in for the limit: the sequence collapses when the
    infimum trajectory is non-increasing and its last value is at most
    ``collapse_ratio`` times its first. Evidence: infimum and volume
    trajectories, L^2 increments, volume lower-bound violations and, with
    ``bounds``, a uniform-integrability audit per term. A collapse with
    volumes bounded below is only consistent if that audit fails.
    """
    if not us:
        raise InvalidArgumentError("empty sequence")
    n = us[0].n
    pts = sampling.points
    vals = [u.evaluate(pts) for u in us]
    infs = [essential_infimum(u, sampling, q, v).estimate for u, v in zip(us, vals)]
    vols = [float(sampling.weights @ np.abs(v) ** (2 * n / (n - 2))) for v in vals]
    incr = [math.sqrt(float(sampling.weights @ (b - a) ** 2)) for a, b in zip(vals, vals[1:])]
    evidence = {"essential_infimum": infs, "volumes": vols, "l2_increments": incr,
                "sampling": sampling.descriptor()}
    if limit is not None:
        lim_inf = essential_infimum(limit, sampling, q).estimate
        evidence["limit_essential_infimum"] = lim_inf
        collapse = lim_inf <= tol
    else:
        monotone = all(b <= a * (1 + 1e-9) + tol for a, b in zip(infs, infs[1:]))
        ratio = infs[-1] / infs[0] if infs[0] > 0 else 0.0
        evidence["infimum_ratio"] = ratio
        collapse = monotone and ratio <= collapse_ratio
    volume_bounded_below = True
    if bounds is not None:
        viol = [j for j, v in enumerate(vols) if v < 1.0 / bounds.V]
        evidence["volume_lower_bound"] = 1.0 / bounds.V
        evidence["volume_lower_bound_violations"] = viol
        volume_bounded_below = not viol
        if probes is None:
            probes = cap_probes(n, 8, (0.1, 0.3, 0.6), seed=0)
        audits = []
        for u in us:
            rep = uniform_integrability_audit(ConformalFactor.from_u(u), bounds, probes)
            audits.append({"worst_ratio": rep.lhs, "verdict": rep.verdict})
        evidence["uniform_integrability"] = audits
        audit_fails = any(not a["verdict"] for a in audits)
        evidence["consistent"] = (not collapse) or (not volume_bounded_below) or audit_fails
    return DichotomyReport("collapse-to-zero" if collapse else "positive-infimum", evidence)


# ---------------------------------------------------------------------------

def f_moment_bound_check(fs: Sequence[ScalarField], e_inf: float, V: float,
                         sampling: SphereSampling, h: float = DEFAULT_H) -> CheckReport:
    """Uniform bound on int f_i^2 from the mean bounds and Poincare.

    Mean: (1/n) ln(V / omega_n) >= mean(f) >= min(2 ln(e_inf/4)/(n-2), 0).
    Poincare on S^n with constant 1/n and the unweighted gradient bound give
    int (f - mean f)^2 <= omega_n / (n-2); hence
    int f^2 <= 2 (omega_n / (n-2) + omega_n M^2), M the larger mean bound.
    """
    if not fs:
        raise InvalidArgumentError("empty sequence")
    n = fs[0].n
    om = sphere_volume(n)
    upper = math.log(V / om) / n
    floor = 2.0 * math.log(e_inf / 4.0) / (n - 2)
    lower = min(floor, 0.0)
    M = max(abs(upper), abs(lower))
    bound = 2.0 * (om / (n - 2) + om * M * M)
    rows = []
    for f in fs:
        vals = f.evaluate(sampling.points)
        g = gradients(f, sampling.points, h)
        mean = integrate(vals, sampling) / om
        rows.append({
            "mean": mean, "min": float(vals.min()),
            "second_moment": integrate(vals ** 2, sampling),
            "variance_integral": integrate((vals - mean) ** 2, sampling),
            "poincare_rhs": integrate(np.sum(g * g, axis=1), sampling) / n,
            "mean_in_bounds": bool(lower - 1e-12 <= mean <= upper + 1e-12),
            "floor_holds": bool(vals.min() >= floor - 1e-12),
        })
    lhs = max(r["second_moment"] for r in rows)
    ok = all(r["mean_in_bounds"] and r["variance_integral"] <= r["poincare_rhs"] * (1 + 1e-6)
             + 1e-12 and r["poincare_rhs"] <= om / (n - 2) for r in rows)
    return CheckReport("f-moment-bound", n, lhs, bound,
                       anchor="int f_i^2 <= 2(omega_n/(n-2) + omega_n M^2)",
                       parameters={"e_inf": e_inf, "V": V, "h": h},
                       sampling=sampling.descriptor(),
                       details={"mean_upper": upper, "floor": floor, "mean_lower": lower,
                                "ok": ok, "per_index": rows,
                                "unscaled_mean_upper": math.log(V / om),
                                "half_floor": math.log(e_inf / 4.0) / (n - 2)})
