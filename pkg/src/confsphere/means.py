"""Spherical means, ball averages and the monotonicity inequalities they satisfy
for functions obeying Delta u <= n(n-2)/4 u.

Three targets share one machinery:

``"u"``      u itself, dimensions 3 and 4, drift c_low(n) ||u||_{2n/(n-2)}
``"power"``  u^{2/(n-2)}, dimensions >= 5, drift c_high(n) ||u||_{2n/(n-2)}^{2/(n-2)}
``"f"``      f = (2/(n-2)) ln u, any n >= 3, drift C(n)

The split at n = 5 is forced: the elementary ratio behind the ``"u"`` drift
blows up like r^{(6-n)/2 - 1} near 0 once n >= 5.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate as sp_integrate

from .conformal import CheckReport, jsonable
from .errors import DimensionError, HypothesisNotMetError, InvalidArgumentError, RangeError
from .fields import (DEFAULT_H, ScalarField, ball_rule, cap_for, derivatives,
                     geodesic_sphere_sampling, lp_norm, spherical_mean_stderr)
from .sphere import RadialGrid, SphereSampling, check_unit, sin_power_integral, sphere_volume

VARIANTS = ("u", "power", "f")


@dataclass(frozen=True)
class MeanConstants:
    n: int
    omega_nm1: float
    c_low: float
    c_high: float
    C_f: float

    def to_dict(self) -> dict:
        return jsonable(self.__dict__)


def constants(n: int) -> MeanConstants:
    if n < 3:
        raise DimensionError(f"constants need n >= 3, got {n}")
    om = sphere_volume(n - 1)
    c_low = n * (n - 2) / 4.0 * (math.pi / 2) ** ((n + 2) / (2 * n)) * om ** ((2 - n) / (2 * n))
    c_high = n / 2.0 * (math.pi / 2) ** (n - 1) * om ** (-1.0 / n)
    C_f = n / 2.0 * sin_power_integral(n - 1, math.pi / 2)
    return MeanConstants(n, om, c_low, c_high, C_f)


def _radii(grid) -> np.ndarray:
    if isinstance(grid, RadialGrid):
        return grid.radii
    return RadialGrid(np.asarray(grid, dtype=float)).radii


def _ratio_report(name, n, radii, exponent, bound, anchor) -> CheckReport:
    num = np.asarray(sin_power_integral(n - 1, radii), dtype=float) ** exponent
    ratios = num / np.sin(radii) ** (n - 1)
    k = int(np.argmax(ratios))
    return CheckReport(name, n, float(ratios[k]), bound, tolerance=1e-9, anchor=anchor,
                       parameters={"grid_points": int(radii.size), "exponent": exponent},
                       details={"argmax_radius": float(radii[k])})


def elementary_ratio_low(n: int, grid) -> CheckReport:
    """max_r (int_0^r sin^{n-1})^{(n+2)/(2n)} / sin^{n-1} r against (pi/2)^{(n+2)/(2n)}."""
    if n not in (3, 4):
        raise DimensionError("the low-dimensional ratio bound only holds for n in {3, 4}")
    e = (n + 2) / (2 * n)
    return _ratio_report("elementary-ratio-low", n, _radii(grid), e, (math.pi / 2) ** e,
                         "(int_0^r sin^{n-1})^{(n+2)/(2n)} / sin^{n-1} r <= (pi/2)^{(n+2)/(2n)}")


def elementary_ratio_high(n: int, grid) -> CheckReport:
    """Same with exponent (n-1)/n; holds for every n >= 2."""
    if n < 2:
        raise DimensionError("n must be >= 2")
    e = (n - 1) / n
    return _ratio_report("elementary-ratio-high", n, _radii(grid), e, (math.pi / 2) ** e,
                         "(int_0^r sin^{n-1})^{(n-1)/n} / sin^{n-1} r <= (pi/2)^{(n-1)/n}")


# ---------------------------------------------------------------------------
# variants and drift constants

def select_variant(n: int, variant: str | None = None) -> str:
    if variant is None:
        return "u" if n in (3, 4) else "power"
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    if variant == "u" and n not in (3, 4):
        raise DimensionError("the u-variant drift is only available for n in {3, 4}")
    return variant


def target_field(u: ScalarField, variant: str) -> ScalarField:
    n = u.n
    if variant == "u":
        return u
    if variant == "power":
        return u ** (2.0 / (n - 2))
    k = 2.0 / (n - 2)
    return u.map(lambda v: k * np.log(v), "f")


def required_drift(u: ScalarField, variant: str, norm_sampling: SphereSampling | None) -> float:
    """Smallest drift constant the monotonicity inequality is proved for."""
    n = u.n
    c = constants(n)
    if variant == "f":
        return c.C_f
    if norm_sampling is None:
        raise InvalidArgumentError("a sampling is needed to evaluate ||u||_{2n/(n-2)}")
    norm = lp_norm(u, norm_sampling, 2.0 * n / (n - 2))
    if variant == "u":
        return c.c_low * norm
    return c.c_high * norm ** (2.0 / (n - 2))


def _resolve_drift(u, variant, K, norm_sampling) -> tuple[float, float | None]:
    need = None
    if variant == "f" or norm_sampling is not None:
        need = required_drift(u, variant, norm_sampling)
    if K is None:
        if need is None:
            raise InvalidArgumentError("either K or a norm sampling is required")
        return need, need
    if need is not None and K < need * (1 - 1e-12):
        raise HypothesisNotMetError(f"drift K={K:.6g} is below the required {need:.6g}")
    return float(K), need


# ---------------------------------------------------------------------------
# profiles

@dataclass(frozen=True, eq=False)
class SphericalMeanProfile:
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    K: float = 0.0

    @property
    def drifted(self) -> np.ndarray:
        return self.values - self.K * self.radii

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "phi", "phi_minus_Kr"])
            for r, v, d in zip(self.radii, self.values, self.drifted):
                w.writerow([repr(float(r)), repr(float(v)), repr(float(d))])

    def to_dict(self) -> dict:
        return jsonable({"center": self.center, "K": self.K, "r": self.radii,
                         "phi": self.values, "phi_minus_Kr": self.drifted,
                         "stderr": self.stderr})


def phi_profile(u: ScalarField, x, grid, cap_count: int | None = 2048, seed: int = 0,
                cap_resolution: int | None = None, K: float = 0.0) -> SphericalMeanProfile:
    """phi(r) = mean of u over the geodesic sphere of radius r about x."""
    x = check_unit(np.asarray(x, dtype=float))
    radii = np.asarray(grid.radii if isinstance(grid, RadialGrid) else grid, dtype=float)
    if np.any(radii <= 0) or np.any(radii >= math.pi) or np.any(np.diff(radii) <= 0):
        raise InvalidArgumentError("profile radii must increase strictly inside (0, pi)")
    vals, errs = [], []
    for r in radii:
        m, se = spherical_mean_stderr(u, cap_for(x, float(r), cap_count, seed, cap_resolution))
        vals.append(m)
        errs.append(se)
    return SphericalMeanProfile(x, radii, np.array(vals), np.array(errs), float(K))


def phi_derivative_identity_check(u: ScalarField, x, r: float, h: float = DEFAULT_H,
                                  cap_resolution: int | None = 16, cap_count: int | None = None,
                                  radial_steps: int = 48, seed: int = 0,
                                  tol: float = 0.01) -> CheckReport:
    """phi'(r) by a centred difference against int_{B_r} Delta u / (omega_{n-1} sin^{n-1} r).

    Both spheres of the difference share their tangent directions, so Monte
    Carlo noise cancels to first order.
    """
    if not 0.0 < r < math.pi / 2:
        raise RangeError(f"r must lie in (0, pi/2), got {r}")
    x = check_unit(np.asarray(x, dtype=float))
    n = u.n
    dr = min(h, r / 2)
    caps = [geodesic_sphere_sampling(x, rr, count=cap_count, seed=seed, resolution=cap_resolution)
            for rr in (r - dr, r + dr)]
    phis = [float(c.weights @ u.evaluate(c.points) / c.weights.sum()) for c in caps]
    lhs = (phis[1] - phis[0]) / (2 * dr)
    lap = ScalarField(lambda p: derivatives(u, p, h)[2], n, name=f"lap[{u.name}]")
    rule = ball_rule(x, r, radial_steps, cap_count, seed, cap_resolution)
    denom = sphere_volume(n - 1) * math.sin(r) ** (n - 1)
    rhs = rule.integral(lap) / denom
    # a sign-changing Laplacian can integrate to ~0; measure error against its mass
    mass = rule.integral(lap.abs()) / denom
    scale = max(abs(rhs), mass, 1e-12)
    return CheckReport("phi-derivative-identity", n, lhs, rhs, tolerance=tol * scale,
                       relation="==",
                       anchor="phi'(r) = int_{B_r} Delta u / (omega_{n-1} sin^{n-1} r)",
                       parameters={"r": r, "h": h, "dr": dr},
                       details={"relative_discrepancy": abs(lhs - rhs) / scale,
                                "laplacian_mass": mass})


def spherical_mean_monotonicity_check(u: ScalarField, K: float | None, x, grid,
                                      norm_sampling: SphereSampling | None = None,
                                      cap_count: int | None = 2048, seed: int = 0,
                                      cap_resolution: int | None = None,
                                      variant: str | None = None,
                                      atol: float = 1e-10) -> CheckReport:
    """r -> mean over the sphere of radius r of (target - K r) is non-increasing.

    Checked on every pair of grid radii with allowance 3 * hypot(se_i, se_j).
    Refuses to run when K is below the proved drift constant.
    """
    n = u.n
    variant = select_variant(n, variant)
    K, need = _resolve_drift(u, variant, K, norm_sampling)
    prof = phi_profile(target_field(u, variant), x, grid, cap_count, seed, cap_resolution, K)
    d = prof.drifted
    se = prof.stderr
    rise = d[None, :] - d[:, None]
    allow = 3.0 * np.hypot(se[:, None], se[None, :]) + atol
    upper = np.triu(np.ones_like(rise, dtype=bool), k=1)
    excess = np.where(upper, rise - allow, -np.inf)
    worst = float(excess.max()) if d.size > 1 else -math.inf
    return CheckReport("spherical-mean-monotonicity", n, worst, 0.0,
                       anchor="r -> mean_{dB_r}(target - K r) is non-increasing",
                       parameters={"K": K, "required_K": need, "variant": variant,
                                   "grid_points": int(d.size)},
                       seed=seed if cap_resolution is None else None,
                       details={"max_uptick": float(np.where(upper, rise, -np.inf).max())
                                if d.size > 1 else 0.0,
                                "profile": prof.to_dict()})


def pointwise_lower_bound_check(u: ScalarField, x, r: float,
                                norm_sampling: SphereSampling,
                                cap_count: int | None = 4096, seed: int = 0,
                                cap_resolution: int | None = None,
                                variant: str | None = None, tol: float = 0.0) -> CheckReport:
    """target(x) >= mean_{dB_r(x)} target - K r with the proved drift K."""
    if not 0.0 < r < math.pi / 2:
        raise RangeError(f"r must lie in (0, pi/2), got {r}")
    n = u.n
    variant = select_variant(n, variant)
    K = required_drift(u, variant, norm_sampling)
    t = target_field(u, variant)
    mean, se = spherical_mean_stderr(t, cap_for(np.asarray(x, float), r, cap_count, seed,
                                                cap_resolution))
    lhs = float(t(np.asarray(x, dtype=float)))
    rhs = mean - K * r
    return CheckReport("pointwise-lower-bound", n, lhs, rhs, tolerance=tol + 3 * se,
                       relation=">=", anchor="target(x) >= mean_{dB_r(x)} target - K r",
                       parameters={"r": r, "K": K, "variant": variant},
                       details={"sphere_mean": mean, "stderr": se})


def ball_average_monotonicity_check(u: ScalarField, K: float | None, x, r0: float, r1: float,
                                    norm_sampling: SphereSampling | None = None,
                                    variant: str | None = None, radial_steps: int = 48,
                                    cap_count: int | None = 1024, seed: int = 0,
                                    cap_resolution: int | None = None,
                                    tol: float = 1e-9) -> CheckReport:
    """avg_{B_r1}(target - K d) <= avg_{B_r0}(target - K d).

    For the ``"f"`` variant the limiting form avg_{B_r1}(f - C(n) d) <= f(x)
    is checked as well.
    """
    if not 0.0 < r0 < r1 < math.pi / 2:
        raise RangeError("need 0 < r0 < r1 < pi/2")
    n = u.n
    variant = select_variant(n, variant)
    K, need = _resolve_drift(u, variant, K, norm_sampling)
    t = target_field(u, variant)
    x = check_unit(np.asarray(x, dtype=float))
    a0 = ball_rule(x, r0, radial_steps, cap_count, seed, cap_resolution).average(t, K)
    a1 = ball_rule(x, r1, radial_steps, cap_count, seed, cap_resolution).average(t, K)
    details = {"avg_r0": a0, "avg_r1": a1}
    if variant == "f":
        fx = float(t(x))
        details.update(value_at_center=fx, ok=bool(a1 <= fx + tol))
    return CheckReport("ball-average-monotonicity", n, a1, a0, tolerance=tol,
                       anchor="avg_{B_r1}(target - K d) <= avg_{B_r0}(target - K d)",
                       parameters={"r0": r0, "r1": r1, "K": K, "required_K": need,
                                   "variant": variant},
                       details=details)


def superharmonic_power_check(u: ScalarField, C: float, alpha: float, probes,
                              h: float = DEFAULT_H, tol: float = 1e-6) -> CheckReport:
    """Delta u <= C u at the probes implies Delta u^alpha <= alpha C u^alpha there."""
    if not 0.0 < alpha < 1.0:
        raise RangeError("alpha must lie in (0, 1)")
    pts = np.atleast_2d(np.asarray(probes, dtype=float))
    uv, _, ul = derivatives(u, pts, h)
    if np.any(uv <= 0):
        raise InvalidArgumentError("u must be positive at the probes")
    base_excess = ul - C * uv
    if np.max(base_excess / np.maximum(np.abs(C * uv), 1.0)) > tol:
        raise HypothesisNotMetError("Delta u <= C u fails at some probe")
    pv, _, pl = derivatives(u ** alpha, pts, h)
    excess = (pl - alpha * C * pv) / np.maximum(np.abs(alpha * C * pv), 1.0)
    return CheckReport("superharmonic-power", u.n, float(excess.max()), 0.0, tolerance=tol,
                       anchor="Delta u <= C u implies Delta u^alpha <= alpha C u^alpha",
                       parameters={"C": C, "alpha": alpha, "probes": int(pts.shape[0]), "h": h},
                       details={"base_max_excess": float(base_excess.max())})


def lower_semicontinuity_probe(u: ScalarField, x, K: float, radii: Sequence[float],
                               radial_steps: int = 48, cap_count: int | None = 1024,
                               seed: int = 0, cap_resolution: int | None = None,
                               tol: float = 1e-9) -> CheckReport:
    """Drifted ball averages on radii shrinking to 0.

    They must not decrease as the radius shrinks; their supremum is the
    lower semicontinuous representative at x. For u continuous at x it
    equals u(x); a change of u on a null set at x is invisible to it.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) >= 0) or radii[-1] <= 0:
        raise InvalidArgumentError("radii must decrease strictly to a positive last value")
    x = check_unit(np.asarray(x, dtype=float))
    avgs = np.array([ball_rule(x, float(s), radial_steps, cap_count, seed, cap_resolution)
                     .average(u, K) for s in radii])
    drops = float(np.max(avgs[:-1] - avgs[1:]))
    sup = float(avgs.max())
    return CheckReport("lower-semicontinuity-probe", u.n, drops, 0.0, tolerance=tol,
                       anchor="u(x) = sup_s avg_{B_s(x)}(u - K d)",
                       parameters={"K": K, "radii": radii},
                       details={"averages": avgs, "supremum": sup,
                                "value_at_center": float(u(x)),
                                "gap_to_value": float(u(x)) - sup})


def drift_integral_ratio(n: int, r1: float) -> float:
    """(int_0^{r1} s sin^{n-1} s ds) / (int_0^{r1} sin^{n-1} s ds), the mean radius of B_{r1}."""
    num, _ = sp_integrate.quad(lambda s: s * math.sin(s) ** (n - 1), 0.0, r1,
                               epsabs=1e-14, epsrel=1e-12)
    return num / sin_power_integral(n - 1, r1)
