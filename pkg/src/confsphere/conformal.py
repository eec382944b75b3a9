"""Conformal metrics g = e^{2f} g_round on S^n and the integral bounds they obey
when their scalar curvature is nonnegative."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, MissingBoundError, RangeError
from .fields import (DEFAULT_H, ScalarField, ball_rule, derivatives, gradients, integrate)
from .sphere import SphereSampling, ball_volume, check_unit, derive_seed, sphere_volume


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples into JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        # fixed precision keeps reports byte-stable across platforms
        return float(f"{v:.12g}")
    return obj


@dataclass
class CheckReport:
    """Outcome of one inequality check, ``lhs <= rhs`` unless ``relation`` says otherwise.

    ``slack`` is oriented so that a nonnegative value means the inequality
    holds; ``verdict`` allows a violation up to ``tolerance``.
    """

    check: str
    n: int
    lhs: float
    rhs: float
    tolerance: float = 0.0
    relation: str = "<="
    anchor: str = ""
    parameters: dict = dc_field(default_factory=dict)
    sampling: dict | None = None
    seed: int | None = None
    details: dict = dc_field(default_factory=dict)

    @property
    def slack(self) -> float:
        if self.relation == "<=":
            return float(self.rhs - self.lhs)
        if self.relation == ">=":
            return float(self.lhs - self.rhs)
        if self.relation == "==":
            return -abs(float(self.lhs - self.rhs))
        raise InvalidArgumentError(f"unknown relation {self.relation!r}")

    @property
    def verdict(self) -> bool:
        return bool(self.slack >= -self.tolerance) and self.details.get("ok", True)

    @property
    def passed(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        return jsonable({
            "check": self.check, "n": self.n, "lhs": self.lhs, "rhs": self.rhs,
            "relation": self.relation, "slack": self.slack, "tolerance": self.tolerance,
            "verdict": "pass" if self.verdict else "fail", "anchor": self.anchor,
            "parameters": self.parameters, "sampling": self.sampling, "seed": self.seed,
            "details": self.details,
        })


@dataclass(frozen=True)
class HypothesisBounds:
    """Two-sided volume bound V, uniform-integrability pair (Lambda, alpha), and
    an optional total-scalar-curvature bound R0."""

    V: float
    Lambda: float
    alpha: float
    R0: float | None = None

    def __post_init__(self):
        if not self.V > 0:
            raise InvalidArgumentError("V must be positive")
        if not self.Lambda > 0:
            raise InvalidArgumentError("Lambda must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if self.R0 is not None and not self.R0 > 0:
            raise InvalidArgumentError("R0 must be positive when given")

    def to_dict(self) -> dict:
        return jsonable({"V": self.V, "Lambda": self.Lambda, "alpha": self.alpha, "R0": self.R0})


class ConformalFactor:
    """The pair (f, u) with u = e^{(n-2) f / 2}, describing g = e^{2f} g_round."""

    def __init__(self, f: ScalarField, name: str | None = None, u: ScalarField | None = None):
        if f.n < 3:
            raise InvalidArgumentError("conformal factors need n >= 3")
        self.f = f
        self.n = f.n
        self.name = name or f.name
        k = (self.n - 2) / 2.0
        grad = None
        if f.gradient is not None:
            grad = lambda p: (k * np.exp(k * f.evaluate(p)))[:, None] * f.gradient(p)  # noqa: E731
        self.u = u if u is not None else ScalarField(
            lambda p: np.exp(k * f.evaluate(p)), self.n, f.smooth, gradient=grad,
            name=f"u[{self.name}]")

    @classmethod
    def from_u(cls, u: ScalarField, name: str | None = None) -> "ConformalFactor":
        k = 2.0 / (u.n - 2)

        def f(p):
            vals = u.evaluate(p)
            if np.any(vals <= 0):
                raise InvalidArgumentError("u must be positive to define f")
            return k * np.log(vals)

        return cls(ScalarField(f, u.n, u.smooth, name=f"f[{u.name}]"), name or u.name, u=u)

    def shifted(self, c: float) -> "ConformalFactor":
        return ConformalFactor(self.f + c, f"{self.name}+{c:g}")

    def density(self) -> ScalarField:
        """Volume density e^{n f}."""
        n = self.n
        return self.f.map(lambda v: np.exp(n * v), "exp_n")

    def __repr__(self) -> str:
        return f"ConformalFactor({self.name!r}, n={self.n})"


# ---------------------------------------------------------------------------

def round_scalar_curvature(n: int) -> float:
    return float(n * (n - 1))


def _curvature_from(n: int, f_vals, grad, lap):
    grad2 = np.sum(grad * grad, axis=1)
    return np.exp(-2.0 * f_vals) * (n * (n - 1) - 2.0 * (n - 1) * lap
                                    - (n - 2) * (n - 1) * grad2)


def scalar_curvature(cf: ConformalFactor, p, h: float = DEFAULT_H):
    """Sc_g at point(s) ``p`` from the conformal change formula."""
    p_arr = np.asarray(p, dtype=float)
    vals, grad, lap = derivatives(cf.f, p_arr, h)
    sc = _curvature_from(cf.n, vals, grad, lap)
    return float(sc[0]) if p_arr.ndim == 1 else sc


@dataclass
class CurvatureReport:
    points: np.ndarray
    values: np.ndarray
    tolerance: float

    @property
    def min(self) -> float:
        return float(self.values.min())

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def nonnegative(self) -> bool:
        return self.min >= -self.tolerance

    def to_dict(self) -> dict:
        return jsonable({"probes": int(self.values.size), "min": self.min, "max": self.max,
                         "tolerance": self.tolerance,
                         "verdict": "pass" if self.nonnegative else "fail"})


def curvature_report(cf: ConformalFactor, points, h: float = DEFAULT_H,
                     tol: float = 1e-6) -> CurvatureReport:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return CurvatureReport(pts, scalar_curvature(cf, pts, h), tol)


def volume(cf: ConformalFactor, sampling: SphereSampling) -> float:
    return integrate(cf.density(), sampling)


def region_volume(cf: ConformalFactor, region: ScalarField, sampling: SphereSampling) -> float:
    """g-volume of the region whose indicator field is ``region``."""
    ind = region.evaluate(sampling.points)
    if not np.all((ind == 0) | (ind == 1)):
        raise InvalidArgumentError("region indicator must take values in {0, 1}")
    dens = cf.density().evaluate(sampling.points)
    return float(sampling.weights @ (ind * dens))


def total_scalar_curvature(cf: ConformalFactor, sampling: SphereSampling,
                           h: float = DEFAULT_H, tol: float = 0.01) -> CheckReport:
    """Both sides of the total scalar curvature identity

        int Sc_g e^{nf} dV = int n(n-1) e^{(n-2)f} + 4(n-1)/(n-2) |grad u|^2 dV.

    The left side uses derivatives of f, the right side derivatives of u,
    so the two quadratures are independent. ``lhs``/``rhs`` agree when the
    relative discrepancy is at most ``tol``.
    """
    n = cf.n
    pts = sampling.points
    fv, fg, fl = derivatives(cf.f, pts, h)
    lhs = float(sampling.weights @ (_curvature_from(n, fv, fg, fl) * np.exp(n * fv)))
    ug = gradients(cf.u, pts, h)
    integrand = (n * (n - 1) * np.exp((n - 2) * fv)
                 + 4.0 * (n - 1) / (n - 2) * np.sum(ug * ug, axis=1))
    rhs = float(sampling.weights @ integrand)
    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return CheckReport("total-scalar-curvature", n, lhs, rhs, tolerance=tol * abs(rhs),
                       relation="==",
                       anchor="int Sc_g dV_g = int n(n-1)e^{(n-2)f} + 4(n-1)/(n-2)|grad u|^2",
                       parameters={"h": h, "relative_tolerance": tol},
                       sampling=sampling.descriptor(),
                       details={"relative_discrepancy": rel})


def weak_psc_residual(u: ScalarField, phi: ScalarField, sampling: SphereSampling,
                      h: float = DEFAULT_H, C: float | None = None) -> float:
    """C int u phi + int <grad phi, grad u>, with C = n(n-2)/4 by default.

    The weak inequality holds against ``phi`` iff the residual is >= 0.
    """
    n = u.n
    C = n * (n - 2) / 4.0 if C is None else C
    pts = sampling.points
    phi_v = phi.evaluate(pts)
    if np.any(phi_v < 0):
        raise InvalidArgumentError("test function must be nonnegative")
    u_v = u.evaluate(pts)
    pairing = np.sum(gradients(phi, pts, h) * gradients(u, pts, h), axis=1)
    return float(sampling.weights @ (C * u_v * phi_v + pairing))


def gradient_l2_bound_check(cf: ConformalFactor, sampling: SphereSampling,
                            h: float = DEFAULT_H, tol: float = 0.0) -> CheckReport:
    """int |grad f|^2 <= n omega_n / (n-2) for PSC conformal factors."""
    n = cf.n
    g = gradients(cf.f, sampling.points, h)
    lhs = float(sampling.weights @ np.sum(g * g, axis=1))
    rhs = n * sphere_volume(n) / (n - 2)
    return CheckReport("gradient-l2-bound", n, lhs, rhs, tol,
                       anchor="int |grad f|^2 <= n omega_n/(n-2) when Sc_g >= 0",
                       parameters={"h": h}, sampling=sampling.descriptor())


def weighted_gradient_rhs(n: int, p: float, V: float) -> float:
    if not 0.0 <= p < (n - 2) / 2.0:
        raise RangeError(f"p must lie in [0, {(n - 2) / 2}) for n={n}, got {p}")
    om = sphere_volume(n)
    return n * V ** (p / n) * om ** ((n - p) / n) / (n - 2 - 2 * p)


def weighted_gradient_bound_check(cf: ConformalFactor, p: float, V: float,
                                  sampling: SphereSampling, h: float = DEFAULT_H,
                                  tol: float = 0.0) -> CheckReport:
    """int e^{pf}|grad f|^2 <= n V^{p/n} omega_n^{(n-p)/n} / (n-2-2p)."""
    n = cf.n
    rhs = weighted_gradient_rhs(n, p, V)
    pts = sampling.points
    g = gradients(cf.f, pts, h)
    lhs = float(sampling.weights @ (np.exp(p * cf.f.evaluate(pts)) * np.sum(g * g, axis=1)))
    return CheckReport("weighted-gradient-bound", n, lhs, rhs, tol,
                       anchor="int e^{pf}|grad f|^2 <= n V^{p/n} omega_n^{(n-p)/n}/(n-2-2p)",
                       parameters={"p": p, "V": V, "h": h}, sampling=sampling.descriptor())


def w1q_bound(n: int, q: float, V: float) -> dict:
    """Explicit constant for int |grad u|^q assembled from the Hoelder chain.

    Writing |grad u|^q = ((n-2)/2)^q e^{q(n-2)f/2} |grad f|^q:

    * q <= n/(n-1): Hoelder with exponents 2/q and 2/(2-q), the gradient
      factor bounded by the unweighted gradient bound and the exponential
      factor by Hoelder against the volume bound V.
    * n/(n-1) < q < 4n/(3n-2): split off e^{theta (n-2) f |grad f|^2} with
      theta = 1 - (2n/q - n)/(n-2), so the exponential factor integrates
      e^{nf} exactly and the gradient factor is the weighted bound at
      p = theta (n-2).
    """
    q_max = 4.0 * n / (3 * n - 2)
    q_mid = n / (n - 1.0)
    if not 1.0 <= q < q_max:
        raise RangeError(f"q must lie in [1, {q_max:.6g}) for n={n}, got {q}")
    om = sphere_volume(n)
    pref = ((n - 2) / 2.0) ** q
    if q <= q_mid:
        s = q * (n - 2) / (2 - q)
        grad_factor = (n * om / (n - 2)) ** (q / 2)
        exp_factor = (V ** (s / n) * om ** (1 - s / n)) ** ((2 - q) / 2)
        regime, theta = "direct", None
    else:
        theta = 1.0 - (2.0 * n / q - n) / (n - 2)
        grad_factor = weighted_gradient_rhs(n, theta * (n - 2), V) ** (q / 2)
        exp_factor = V ** ((2 - q) / 2)
        regime = "interpolated"
    return {"bound": pref * grad_factor * exp_factor, "prefactor": pref,
            "gradient_factor": grad_factor, "exponential_factor": exp_factor,
            "theta": theta, "regime": regime}


def w1q_bound_check(cf: ConformalFactor, q: float, V: float, sampling: SphereSampling,
                    h: float = DEFAULT_H, tol: float = 0.0) -> CheckReport:
    n = cf.n
    parts = w1q_bound(n, q, V)
    g = gradients(cf.u, sampling.points, h)
    lhs = float(sampling.weights @ np.sum(g * g, axis=1) ** (q / 2))
    return CheckReport("w1q-bound", n, lhs, parts["bound"], tol,
                       anchor="int |grad e^{(n-2)f/2}|^q <= C(n, V, q), q < 4n/(3n-2)",
                       parameters={"q": q, "V": V, "h": h}, sampling=sampling.descriptor(),
                       details=parts)


# ---------------------------------------------------------------------------
# uniform integrability

def ball_g_volume(cf: ConformalFactor, x, r: float, radial_steps: int = 64,
                  cap_resolution: int | None = 12, cap_count: int | None = None,
                  seed: int = 0) -> float:
    """Vol_g(B_r(x)) by polar quadrature, valid for r up to pi."""
    rule = ball_rule(x, r, radial_steps, cap_count, seed, cap_resolution)
    return rule.integral(cf.density())


def cap_probes(n: int, count: int, radii: Sequence[float], seed: int,
               centers: Iterable = ()) -> list[tuple[np.ndarray, float]]:
    """Seeded random centres plus explicit ones, each paired with every radius."""
    rng = np.random.default_rng(derive_seed(seed, n, count))
    g = rng.standard_normal((count, n + 1))
    cs = list(g / np.linalg.norm(g, axis=1, keepdims=True))
    cs += [check_unit(np.asarray(c, dtype=float)) for c in centers]
    return [(c, float(r)) for c in cs for r in radii]


def uniform_integrability_audit(cf: ConformalFactor, bounds: HypothesisBounds,
                                probes: Sequence[tuple], radial_steps: int = 64,
                                cap_resolution: int | None = 12) -> CheckReport:
    """Worst ratio Vol_g(B) / Vol(B)^alpha over geodesic-ball probes versus Lambda.

    Balls stand in for arbitrary measurable sets: they are what detects
    volume concentrating at a point. No probes means a vacuous pass.
    """
    n = cf.n
    worst, worst_probe, rows = 0.0, None, []
    for center, r in probes:
        vg = ball_g_volume(cf, center, r, radial_steps, cap_resolution)
        ratio = vg / ball_volume(n, r) ** bounds.alpha
        rows.append({"center": np.asarray(center), "radius": r, "g_volume": vg, "ratio": ratio})
        if ratio > worst:
            worst, worst_probe = ratio, rows[-1]
    return CheckReport("uniform-integrability", n, worst, bounds.Lambda, tolerance=1e-9,
                       anchor="Vol_g(U) <= Lambda Vol(U)^alpha",
                       parameters={"Lambda": bounds.Lambda, "alpha": bounds.alpha,
                                   "probes": len(rows)},
                       details={"worst_probe": worst_probe,
                                "violations": sum(r["ratio"] > bounds.Lambda * (1 + 1e-9)
                                                  for r in rows)})


def require_r0(bounds: HypothesisBounds | None) -> float:
    if bounds is None or bounds.R0 is None:
        raise MissingBoundError("a total scalar curvature bound R0 is required")
    return bounds.R0
