"""Finite-prefix convergence diagnostics and the good/bad set decomposition.

For a pair f_j, f_inf the deviation w = |f_j - f_inf|^2 (or the same for
u = e^{(n-2)f/2}) is split at a level tau_j chosen in [sqrt(C_j)/2, sqrt(C_j)]
where C_j = 2 ||f_j - f_inf||_2 (int |grad f_j|^2 + |grad f_inf|^2)^{1/2}.
The coarea formula turns int |grad w| over a level band into an integral of
level-set areas; averaging over the bracket gives a level whose area is at
most the band total divided by the bracket width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .conformal import (CheckReport, HypothesisBounds, jsonable, require_r0,
                        total_scalar_curvature, weak_psc_residual)
from .errors import HypothesisNotMetError, InvalidArgumentError
from .fields import DEFAULT_H, ScalarField, gradients
from .scenarios import FactorSequence
from .sphere import SphereSampling


def _wg(w: ScalarField, sampling: SphereSampling, h: float):
    vals = w.evaluate(sampling.points)
    gn = np.linalg.norm(gradients(w, sampling.points, h), axis=1)
    return vals, gn


def squared_difference(a: ScalarField, b: ScalarField) -> ScalarField:
    """|a - b|^2 with a closed-form gradient when both inputs carry one."""
    def grad(p):
        d = a.evaluate(p) - b.evaluate(p)
        return (2.0 * d)[:, None] * (a.gradient(p) - b.gradient(p))

    closed = a.gradient is not None and b.gradient is not None
    return ScalarField(lambda p: (a.evaluate(p) - b.evaluate(p)) ** 2, a.n,
                       gradient=grad if closed else None, name=f"|{a.name}-{b.name}|^2")


# ---------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """L^p distances and weak-gradient pairings along a finite prefix.

    Weak convergence cannot be certified by finitely many terms or test
    functions; ``pairing_decay`` is finite-family weak-pairing decay.
    """

    exponents: list
    distances: dict
    pairings: list
    flagged_exponents: list
    n: int

    def decays(self, p) -> bool:
        d = self.distances[p]
        return all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(d, d[1:]))

    @property
    def pairing_decay(self) -> bool:
        if not self.pairings or not self.pairings[0]:
            return True
        mags = np.abs(np.array(self.pairings))
        return bool(np.all(mags[-1] <= mags[0] + 1e-12))

    def to_dict(self) -> dict:
        return jsonable({"n": self.n, "exponents": self.exponents,
                         "distances": {str(p): d for p, d in self.distances.items()},
                         "monotone_decay": {str(p): self.decays(p) for p in self.exponents},
                         "pairings": self.pairings,
                         "finite_family_weak_pairing_decay": self.pairing_decay,
                         "outside_guaranteed_range": self.flagged_exponents})


def convergence_report(seq: FactorSequence, sampling: SphereSampling,
                       exponents: Sequence[float] = (1.0, 2.0),
                       test_functions: Sequence[ScalarField] = (),
                       h: float = DEFAULT_H) -> ConvergenceReport:
    """||u_j - u_inf||_p and int <grad(u_j - u_inf), grad phi> for each j.

    Exponents p >= 2n/(n-2) are computed but flagged: strong convergence is
    only guaranteed below that exponent.
    """
    if seq.limit is None:
        raise InvalidArgumentError("convergence report needs a candidate limit")
    n = seq.n
    pts = sampling.points
    w = sampling.weights
    lim = seq.limit.u.evaluate(pts)
    lim_g = gradients(seq.limit.u, pts, h)
    phi_g = [gradients(phi, pts, h) for phi in test_functions]
    distances = {float(p): [] for p in exponents}
    pairings = []
    for cf in seq.factors:
        diff = cf.u.evaluate(pts) - lim
        for p in distances:
            distances[p].append(float((w @ np.abs(diff) ** p) ** (1.0 / p)))
        dg = gradients(cf.u, pts, h) - lim_g
        pairings.append([float(w @ np.sum(dg * g, axis=1)) for g in phi_g])
    crit = 2.0 * n / (n - 2)
    return ConvergenceReport([float(p) for p in exponents], distances, pairings,
                             [float(p) for p in exponents if p >= crit], n)


def cj_factors(a: ScalarField, b: ScalarField, sampling: SphereSampling,
               h: float = DEFAULT_H) -> dict:
    pts = sampling.points
    w = sampling.weights
    l2 = math.sqrt(float(w @ (a.evaluate(pts) - b.evaluate(pts)) ** 2))
    ga, gb = gradients(a, pts, h), gradients(b, pts, h)
    energy = float(w @ (np.sum(ga * ga, axis=1) + np.sum(gb * gb, axis=1)))
    return {"l2_distance": l2, "gradient_energy": energy,
            "C": 2.0 * l2 * math.sqrt(energy)}


def cj_bound(f_j: ScalarField, f_inf: ScalarField, sampling: SphereSampling,
             h: float = DEFAULT_H) -> float:
    """C(j) = 2 ||f_j - f_inf||_2 (int |grad f_j|^2 + |grad f_inf|^2)^{1/2}."""
    return cj_factors(f_j, f_inf, sampling, h)["C"]


def level_band_coarea(w: ScalarField, tau1: float, tau2: float, sampling: SphereSampling,
                      h: float = DEFAULT_H, _cache=None) -> float:
    """int over {tau1 < w <= tau2} of |grad w|."""
    if not tau1 < tau2:
        raise InvalidArgumentError("need tau1 < tau2")
    vals, gn = _cache if _cache is not None else _wg(w, sampling, h)
    mask = (vals > tau1) & (vals <= tau2)
    return float(sampling.weights @ (gn * mask))


def perimeter_estimate(w: ScalarField, tau: float, delta: float, sampling: SphereSampling,
                       h: float = DEFAULT_H, _cache=None) -> float:
    """Area of {w = tau} as the coarea band over [tau - delta, tau + delta] / (2 delta)."""
    if not delta > 0:
        raise InvalidArgumentError("delta must be positive")
    return level_band_coarea(w, tau - delta, tau + delta, sampling, h, _cache) / (2 * delta)


@dataclass
class TauSelection:
    tau: float
    perimeter: float
    bracket: tuple
    cap: float
    band_total: float
    scan: list
    resolved: bool = True

    @property
    def in_bracket(self) -> bool:
        lo, hi = self.bracket
        return lo - 1e-15 <= self.tau <= hi + 1e-15

    def to_dict(self) -> dict:
        return jsonable({"tau": self.tau, "perimeter": self.perimeter, "bracket": self.bracket,
                         "cap": self.cap, "band_total": self.band_total, "scan": self.scan,
                         "resolved": self.resolved})


def select_tau(w: ScalarField, Cj: float, sampling: SphereSampling, h: float = DEFAULT_H,
               subbands: int = 8, min_samples: int = 8, _cache=None) -> TauSelection:
    """Level in [sqrt(C)/2, sqrt(C)] with the smallest estimated level-set area.

    The bracket is cut into equal sub-bands; each candidate is a sub-band
    centre with the sub-band's coarea quotient as its area. Those quotients
    average to band_total / width, so the minimum is at most that, which is
    at most 2 sqrt(C) whenever band_total <= C. Sub-bands inside the range of
    w holding fewer than ``min_samples`` samples are merged with their
    neighbours; the merged bands still partition the bracket, so the bound
    survives. The scan keeps the fine sub-bands.
    """
    if Cj < 0:
        raise InvalidArgumentError("C(j) must be nonnegative")
    if Cj == 0:
        return TauSelection(0.0, 0.0, (0.0, 0.0), 0.0, 0.0, [])
    cache = _cache if _cache is not None else _wg(w, sampling, h)
    eps = math.sqrt(Cj)
    lo, hi = eps / 2, eps
    edges = np.linspace(lo, hi, subbands + 1)
    delta = (hi - lo) / (2 * subbands)
    vals = cache[0]
    scan, counts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        scan.append([float((a + b) / 2), level_band_coarea(w, a, b, sampling, h, cache) / (2 * delta)])
        counts.append(int(np.count_nonzero((vals > a) & (vals <= b))))
    # an empty band outside [min w, max w] is an empty level set, not a resolution gap
    vmin, vmax = float(vals.min()), float(vals.max())
    exempt = [not (vmin <= a and b <= vmax) for a, b in zip(edges[:-1], edges[1:])]
    groups, cur = [], []
    for i in range(subbands):
        cur.append(i)
        if sum(counts[g] for g in cur) >= min_samples or all(exempt[g] for g in cur):
            groups.append(cur)
            cur = []
    if cur:
        if groups:
            groups[-1] += cur
        else:
            groups.append(cur)
    resolved = len(groups) > 1 or sum(counts) >= min_samples or all(exempt)
    best = None
    for g in groups:
        a, b = edges[g[0]], edges[g[-1] + 1]
        per = level_band_coarea(w, a, b, sampling, h, cache) / (b - a)
        if best is None or per < best[1]:
            best = (float((a + b) / 2), per)
    for row, c in zip(scan, counts):
        row.append(c)
    total = level_band_coarea(w, lo, hi, sampling, h, cache)
    return TauSelection(best[0], best[1], (lo, hi), 2 * eps, total, scan, bool(resolved))


def chebyshev_volume_bound(w: ScalarField, tau: float, sampling: SphereSampling,
                           values: np.ndarray | None = None) -> tuple[float, float]:
    """(Vol{w >= tau}, int w / tau)."""
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    vals = w.evaluate(sampling.points) if values is None else values
    if np.any(vals < 0):
        raise InvalidArgumentError("w must be nonnegative")
    return float(sampling.weights @ (vals >= tau)), float(sampling.weights @ vals) / tau


@dataclass
class SingularSetReport:
    j: int
    variant: str
    C: float
    tau: float
    bracket: tuple
    perimeter: float
    band_total: float
    bad_mask: np.ndarray
    bad_volume: float
    chebyshev_bound: float
    good_g_volume: float
    bad_g_volume: float
    good_sup: float
    ui_bound: float | None = None
    scan: list = dc_field(default_factory=list)
    factors: dict = dc_field(default_factory=dict)
    resolved: bool = True

    @property
    def epsilon(self) -> float:
        return math.sqrt(self.C)

    @property
    def perimeter_cap(self) -> float:
        return 2.0 * self.epsilon

    def checks(self, perimeter_tol: float = 0.05) -> dict:
        lo, hi = self.bracket
        return {
            "tau_in_bracket": bool(lo - 1e-15 <= self.tau <= hi + 1e-15),
            "perimeter_within_cap": bool(self.perimeter <= self.perimeter_cap * (1 + perimeter_tol)),
            "band_total_within_C": bool(self.band_total <= self.C * (1 + 1e-9) + 1e-15),
            "chebyshev": bool(self.bad_volume <= self.chebyshev_bound * (1 + 1e-12) + 1e-300),
            "good_set_sup": bool(self.good_sup <= self.tau),
            "uniform_integrability": (None if self.ui_bound is None
                                      else bool(self.bad_g_volume <= self.ui_bound * (1 + 1e-9))),
        }

    def to_dict(self) -> dict:
        return jsonable({
            "j": self.j, "variant": self.variant, "C": self.C, "epsilon": self.epsilon,
            "tau": self.tau, "bracket": self.bracket, "perimeter": self.perimeter,
            "perimeter_cap": self.perimeter_cap, "band_total": self.band_total,
            "bad_volume": self.bad_volume, "chebyshev_bound": self.chebyshev_bound,
            "good_g_volume": self.good_g_volume, "bad_g_volume": self.bad_g_volume,
            "good_sup": self.good_sup, "ui_bound": self.ui_bound,
            "bad_samples": int(self.bad_mask.sum()), "checks": self.checks(),
            "factors": self.factors, "scan": self.scan, "resolved": self.resolved,
            "convention": "w = |difference|^2 compared with tau; Chebyshev divisor tau",
        })


def singular_set_decompose(seq: FactorSequence, j: int, variant: str,
                           sampling: SphereSampling, h: float = DEFAULT_H,
                           bounds: HypothesisBounds | None = None,
                           subbands: int = 8, curvature_sampling: SphereSampling | None = None
                           ) -> SingularSetReport:
    """Good/bad split of S^n for the j-th term.

    ``variant`` "f" uses w = |f_j - f_inf|^2. Variant "u" uses
    w = |u_j - u_inf|^2 and requires the total scalar curvature of g_j to be
    at most R0; it refuses to run without R0.
    """
    if seq.limit is None:
        raise InvalidArgumentError("decomposition needs a candidate limit")
    bounds = bounds if bounds is not None else seq.bounds
    cf, lim = seq.factors[j], seq.limit
    n = seq.n
    if variant == "u":
        R0 = require_r0(bounds)
        tsc = total_scalar_curvature(cf, curvature_sampling or sampling, h).lhs
        if tsc > R0 * (1 + 1e-9):
            raise HypothesisNotMetError(f"total scalar curvature {tsc:.6g} exceeds R0={R0:.6g}")
        a, b = cf.u, lim.u
    elif variant == "f":
        a, b = cf.f, lim.f
    else:
        raise InvalidArgumentError(f"unknown variant {variant!r}")
    factors = cj_factors(a, b, sampling, h)
    C = factors["C"]
    w = squared_difference(a, b)
    cache = _wg(w, sampling, h)
    vals = cache[0]
    sel = select_tau(w, C, sampling, h, subbands, _cache=cache)
    bad = vals > sel.tau
    weights = sampling.weights
    dens = np.exp(n * cf.f.evaluate(sampling.points))
    bad_vol = float(weights @ bad)
    cheb = float(weights @ vals) / sel.tau if sel.tau > 0 else (0.0 if not bad.any() else math.inf)
    ui = None
    if bounds is not None:
        ui = bounds.Lambda * bad_vol ** bounds.alpha
    return SingularSetReport(
        j=j, variant=variant, C=C, tau=sel.tau, bracket=sel.bracket, perimeter=sel.perimeter,
        band_total=sel.band_total, bad_mask=bad, bad_volume=bad_vol, chebyshev_bound=cheb,
        good_g_volume=float(weights @ (dens * ~bad)), bad_g_volume=float(weights @ (dens * bad)),
        good_sup=float(vals[~bad].max()) if (~bad).any() else 0.0, ui_bound=ui,
        scan=sel.scan, factors=factors, resolved=sel.resolved)


def limit_weak_psc_check(u_inf: ScalarField, family: Sequence[ScalarField],
                         sampling: SphereSampling, h: float = DEFAULT_H,
                         tol: float = 1e-3, C: float | None = None) -> CheckReport:
    """Weak inequality -int <grad phi, grad u> <= C int phi u over a test family."""
    residuals = [weak_psc_residual(u_inf, phi, sampling, h, C) for phi in family]
    n = u_inf.n
    return CheckReport("limit-weak-psc", n, min(residuals) if residuals else 0.0, 0.0,
                       tolerance=tol, relation=">=",
                       anchor="-int <grad phi, grad u_inf> <= n(n-2)/4 int phi u_inf",
                       parameters={"C": n * (n - 2) / 4.0 if C is None else C,
                                   "family_size": len(residuals)},
                       sampling=sampling.descriptor(),
                       details={"residuals": residuals})
