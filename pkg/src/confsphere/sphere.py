"""Sampling, quadrature and geodesic primitives on the unit round sphere.

Points of S^n are stored as unit vectors in R^{n+1}, one per row. Every
sampling carries quadrature weights for the round volume measure, so an
integral is always ``weights @ values``.

Four constructions are available:

* ``uniform_sphere_sampling``  -- i.i.d. Monte Carlo (normalised Gaussians)
* ``qmc_sphere_sampling``      -- scrambled Sobol points pushed through the
  same Gaussian map (randomised quasi Monte Carlo)
* ``product_sphere_sampling``  -- Gauss-Legendre in every polar angle,
  uniform in the azimuth, optionally rigidly rotated
* ``polar_sphere_sampling``    -- composite Gauss-Legendre in geodesic
  radius about a centre times a product rule on the tangent sphere; this
  resolves features concentrated near the centre.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, special
from scipy.stats import norm, qmc, special_ortho_group

from .errors import InvalidArgumentError

UNIT_TOL = 1e-10
MAX_PRODUCT_DIM = 5


def sphere_volume(n: int) -> float:
    """Volume of the unit round n-sphere, 2 pi^{(n+1)/2} / Gamma((n+1)/2)."""
    if n < 1:
        raise InvalidArgumentError(f"sphere dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 63-bit child seed from a base seed and arbitrary keys."""
    h = hashlib.sha256(str(int(seed)).encode())
    for key in keys:
        arr = np.asarray(key, dtype=float)
        h.update(arr.tobytes())
    return int.from_bytes(h.digest()[:8], "little") >> 1


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[None, :] if p.ndim == 1 else p


def check_unit(p, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``p`` as an array, raising if any row is not a unit vector."""
    arr = np.asarray(p, dtype=float)
    norms = np.linalg.norm(_as_points(arr), axis=1)
    if not np.all(np.abs(norms - 1.0) <= tol):
        raise InvalidArgumentError("expected unit vector(s) on the sphere")
    return arr


def basis_vector(n: int, i: int) -> np.ndarray:
    """The i-th standard basis vector of R^{n+1} (0-based), a point of S^n."""
    e = np.zeros(n + 1)
    e[i] = 1.0
    return e


def geodesic_distance(x, y) -> np.ndarray | float:
    """Great-circle distance; rows of either argument are broadcast."""
    x = check_unit(x)
    y = check_unit(y)
    ip = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
    d = np.arccos(ip)
    return float(d) if np.ndim(d) == 0 else d


def sin_power_integral(k: int, r) -> np.ndarray | float:
    """int_0^r sin^k s ds for r in [0, pi] via the regularized incomplete beta
    function; the reduction recursion cancels catastrophically for small r."""
    r = np.asarray(r, dtype=float)
    a = (k + 1) / 2.0
    half = 0.5 * special.beta(a, 0.5)  # int_0^{pi/2} sin^k
    folded = np.minimum(r, math.pi - r)
    part = half * special.betainc(a, 0.5, np.sin(folded) ** 2)
    out = np.where(r <= math.pi / 2, part, 2.0 * half - part)
    return float(out) if out.ndim == 0 else out


def ball_volume(n: int, r: float) -> float:
    """Round volume of a geodesic ball, omega_{n-1} int_0^r sin^{n-1}."""
    if not 0.0 <= r <= math.pi:
        raise InvalidArgumentError(f"radius must lie in [0, pi], got {r}")
    if r == 0.0:
        return 0.0
    val, _ = integrate.quad(lambda s: math.sin(s) ** (n - 1), 0.0, r,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return sphere_volume(n - 1) * val


@dataclass(frozen=True, eq=False)
class SphereSampling:
    """Finite weighted point set on S^n for the round volume measure."""

    n: int
    points: np.ndarray
    weights: np.ndarray
    kind: str
    seed: int | None = None
    count: int | None = None
    resolution: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def descriptor(self) -> dict:
        d = {"dimension": self.n, "kind": self.kind}
        if self.count is not None:
            d["count"] = self.count
        if self.resolution is not None:
            d["resolution"] = self.resolution
        if self.seed is not None:
            d["seed"] = self.seed
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    def subset(self, mask) -> "SphereSampling":
        mask = np.asarray(mask, dtype=bool)
        return SphereSampling(self.n, self.points[mask].copy(), self.weights[mask].copy(),
                              self.kind, self.seed, self.count, self.resolution,
                              dict(self.extra, subset=True))

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i}" for i in range(self.n + 1)] + ["weight"])
            for p, w in zip(self.points, self.weights):
                writer.writerow([repr(float(v)) for v in p] + [repr(float(w))])


def _gaussian_directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def uniform_sphere_sampling(n: int, count: int, seed: int) -> SphereSampling:
    """i.i.d. uniform points on S^n with equal weights omega_n / count."""
    if n < 2:
        raise InvalidArgumentError(f"dimension must be >= 2, got {n}")
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = _gaussian_directions(n + 1, count, rng)
    w = np.full(count, sphere_volume(n) / count)
    return SphereSampling(n, pts, w, "monte-carlo", seed=seed, count=count)


def qmc_sphere_sampling(n: int, count: int, seed: int) -> SphereSampling:
    """Scrambled Sobol points mapped to S^n through the Gaussian inverse CDF."""
    if n < 2:
        raise InvalidArgumentError(f"dimension must be >= 2, got {n}")
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    engine = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance properties only hold for powers of two; callers pick count
        warnings.simplefilter("ignore", UserWarning)
        u = engine.random(count)
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    g = norm.ppf(u)
    pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    w = np.full(count, sphere_volume(n) / count)
    return SphereSampling(n, pts, w, "quasi-monte-carlo", seed=seed, count=count)


def _unit_sphere_rule(k: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^k in R^{k+1}: m Gauss-Legendre nodes per polar angle,
    2m uniform azimuth nodes."""
    naz = 2 * m
    phi = np.arange(naz) * (2.0 * math.pi / naz)
    wphi = np.full(naz, 2.0 * math.pi / naz)
    if k == 1:
        return np.column_stack([np.cos(phi), np.sin(phi)]), wphi
    x, wx = np.polynomial.legendre.leggauss(m)
    theta = (x + 1.0) * (math.pi / 2.0)
    wtheta = wx * (math.pi / 2.0)
    grids = np.meshgrid(*([theta] * (k - 1) + [phi]), indexing="ij")
    wgrids = np.meshgrid(*([wtheta] * (k - 1) + [wphi]), indexing="ij")
    angles = [g.ravel() for g in grids]
    w = np.prod([g.ravel() for g in wgrids], axis=0)
    pts = np.empty((angles[0].size, k + 1))
    s = np.ones_like(angles[0])
    for i in range(k - 1):
        w = w * np.sin(angles[i]) ** (k - 1 - i)
        pts[:, i] = s * np.cos(angles[i])
        s = s * np.sin(angles[i])
    pts[:, k - 1] = s * np.cos(angles[k - 1])
    pts[:, k] = s * np.sin(angles[k - 1])
    return pts, w


def product_sphere_sampling(n: int, resolution: int,
                            rotation_seed: int | None = None) -> SphereSampling:
    """Deterministic product rule on S^n.

    ``rotation_seed`` applies a fixed Haar-random rotation to the rule. The
    rotated rule keeps its weights and antipodal symmetry but no longer lines
    up with coordinate level sets, which matters for indicator integrals.
    """
    if n < 1 or n > MAX_PRODUCT_DIM:
        raise InvalidArgumentError(f"product rule supports 1 <= n <= {MAX_PRODUCT_DIM}")
    if resolution < 2:
        raise InvalidArgumentError("resolution must be >= 2")
    pts, w = _unit_sphere_rule(n, resolution)
    extra = {}
    if rotation_seed is not None:
        rot = special_ortho_group.rvs(n + 1, random_state=rotation_seed)
        pts = pts @ rot.T
        extra["rotation_seed"] = rotation_seed
    return SphereSampling(n, np.ascontiguousarray(pts), w, "product-rule",
                          resolution=resolution, extra=extra)


def tangent_frame(x) -> np.ndarray:
    """Orthonormal basis (rows) of the tangent hyperplane x^perp."""
    x = check_unit(x)
    d = x.size
    m = np.column_stack([x, np.eye(d)])
    q, _ = np.linalg.qr(m)
    frame = q[:, 1:d].T
    # QR may flip the sign of the first column; the complement is unaffected.
    return frame


def polar_sphere_sampling(n: int, center, breakpoints: Sequence[float] = (),
                          radial_nodes: int = 64, cap_resolution: int = 8) -> SphereSampling:
    """Polar rule about ``center``: composite Gauss-Legendre in the geodesic
    radius on [0, b1], [b1, b2], ..., [bk, pi], times a product rule on the
    unit tangent sphere."""
    center = check_unit(center)
    if center.size != n + 1:
        raise InvalidArgumentError("center dimension mismatch")
    edges = sorted({float(b) for b in breakpoints if 0.0 < b < math.pi})
    edges = [0.0] + edges + [math.pi]
    x, wx = np.polynomial.legendre.leggauss(radial_nodes)
    radii, rw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        radii.append(a + (x + 1.0) * (b - a) / 2.0)
        rw.append(wx * (b - a) / 2.0)
    radii = np.concatenate(radii)
    rw = np.concatenate(rw) * np.sin(radii) ** (n - 1)
    dirs, dw = _unit_sphere_rule(n - 1, cap_resolution)
    frame = tangent_frame(center)
    tang = dirs @ frame
    pts = (np.cos(radii)[:, None, None] * center[None, None, :]
           + np.sin(radii)[:, None, None] * tang[None, :, :]).reshape(-1, n + 1)
    w = (rw[:, None] * dw[None, :]).ravel()
    extra = {"center": [float(c) for c in center], "breakpoints": edges[1:-1],
             "radial_nodes": radial_nodes, "cap_resolution": cap_resolution}
    return SphereSampling(n, pts, w, "polar", extra=extra)


def sampling_from_descriptor(desc: dict) -> SphereSampling:
    """Rebuild a sampling from its JSON descriptor."""
    kind = desc["kind"]
    n = int(desc["dimension"])
    if kind == "monte-carlo":
        return uniform_sphere_sampling(n, int(desc["count"]), int(desc["seed"]))
    if kind == "quasi-monte-carlo":
        return qmc_sphere_sampling(n, int(desc["count"]), int(desc["seed"]))
    if kind == "product-rule":
        return product_sphere_sampling(n, int(desc["resolution"]), desc.get("rotation_seed"))
    if kind == "polar":
        return polar_sphere_sampling(n, desc["center"], desc.get("breakpoints", ()),
                                     int(desc.get("radial_nodes", 64)),
                                     int(desc.get("cap_resolution", 8)))
    raise InvalidArgumentError(f"unknown sampling kind {kind!r}")


@dataclass(frozen=True, eq=False)
class CapSampling:
    """Weighted points on the geodesic sphere of radius r about x."""

    center: np.ndarray
    radius: float
    points: np.ndarray
    weights: np.ndarray
    frame: np.ndarray
    kind: str
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.center.size - 1

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def _tangent_directions(frame: np.ndarray, count: int | None, seed: int | None,
                        resolution: int | None) -> tuple[np.ndarray, np.ndarray, str]:
    k = frame.shape[0] - 1  # tangent sphere is S^k
    if resolution is not None:
        dirs, dw = _unit_sphere_rule(k, resolution)
        return dirs @ frame, dw / dw.sum(), "product-rule"
    if count is None or count < 1:
        raise InvalidArgumentError("count must be >= 1")
    rng = np.random.default_rng(seed)
    dirs = _gaussian_directions(k + 1, count, rng)
    return dirs @ frame, np.full(count, 1.0 / count), "monte-carlo"


def geodesic_sphere_sampling(x, r: float, count: int | None = None, seed: int | None = 0,
                             resolution: int | None = None) -> CapSampling:
    """Points cos(r) x + sin(r) v with v on the unit sphere of x^perp.

    With ``resolution`` the tangent directions come from the product rule,
    otherwise ``count`` i.i.d. directions drawn with ``seed``. Weights carry
    the induced measure, summing to omega_{n-1} sin^{n-1} r.
    """
    x = check_unit(x)
    if not 0.0 < r < math.pi:
        raise InvalidArgumentError(f"cap radius must lie in (0, pi), got {r}")
    n = x.size - 1
    frame = tangent_frame(x)
    tang, rel_w, kind = _tangent_directions(frame, count, seed, resolution)
    pts = math.cos(r) * x[None, :] + math.sin(r) * tang
    w = rel_w * sphere_volume(n - 1) * math.sin(r) ** (n - 1)
    return CapSampling(x.copy(), float(r), pts, w, frame, kind,
                       seed if kind == "monte-carlo" else None)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii inside (0, pi/2]."""

    radii: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size == 0:
            raise InvalidArgumentError("radial grid must be a non-empty 1-D array")
        if np.any(np.diff(r) <= 0):
            raise InvalidArgumentError("radii must be strictly increasing")
        if r[0] <= 0.0 or r[-1] > math.pi / 2 + 1e-15:
            raise InvalidArgumentError("radii must lie in (0, pi/2]")
        object.__setattr__(self, "radii", r)

    @property
    def count(self) -> int:
        return self.radii.size


def radial_grid(count: int, r_min: float = 0.02, r_max: float = 1.5) -> RadialGrid:
    return RadialGrid(np.linspace(r_min, r_max, count))

