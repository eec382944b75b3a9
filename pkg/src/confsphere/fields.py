"""Scalar fields on S^n and intrinsic calculus by ambient finite differences.

A field is evaluated on unit vectors only. Derivatives use the degree-0
homogeneous extension F(x) = f(x / |x|): its ambient gradient at |x| = 1 is
the intrinsic gradient, and its ambient Laplacian on |x| = 1 equals the
Laplace-Beltrami operator of f, because the radial terms of the Euclidean
Laplacian vanish for a radially constant function.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .sphere import (CapSampling, SphereSampling, _as_points, check_unit, derive_seed,
                     geodesic_sphere_sampling, sphere_volume)

DEFAULT_H = 1e-3
CHUNK = 1 << 17


class ScalarField:
    """A real function on S^n, vectorised over rows of unit vectors.

    ``func`` maps an (m, n+1) array of unit vectors to m values. ``smooth``
    is False for fields with kinks (truncations); derivative checks on them
    use relaxed tolerances. ``gradient`` is an optional closed-form
    intrinsic gradient with the same calling convention, returning (m, n+1).
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], n: int, smooth: bool = True,
                 gradient: Callable[[np.ndarray], np.ndarray] | None = None,
                 name: str | None = None):
        if n < 1:
            raise InvalidArgumentError("field dimension must be >= 1")
        self.func = func
        self.n = int(n)
        self.smooth = smooth
        self.gradient = gradient
        self.name = name or getattr(func, "__name__", "field")

    def __repr__(self) -> str:
        return f"ScalarField({self.name!r}, n={self.n})"

    def evaluate(self, points) -> np.ndarray:
        pts = _as_points(points)
        if pts.shape[1] != self.n + 1:
            raise InvalidArgumentError(
                f"field on S^{self.n} evaluated at points of R^{pts.shape[1]}")
        return np.broadcast_to(np.asarray(self.func(pts), dtype=float), (pts.shape[0],))

    def __call__(self, points):
        vals = self.evaluate(points)
        return float(vals[0]) if np.ndim(points) == 1 else vals

    # arithmetic builds new fields lazily
    def _combine(self, other, op, sym):
        # closed-form gradients survive linear combinations only
        g1 = self.gradient
        if isinstance(other, ScalarField):
            if other.n != self.n:
                raise InvalidArgumentError("dimension mismatch between fields")
            g2 = other.gradient
            grad = None
            if g1 is not None and g2 is not None and sym in "+-":
                sign = 1.0 if sym == "+" else -1.0
                grad = lambda p: g1(p) + sign * g2(p)  # noqa: E731
            return ScalarField(lambda p: op(self.evaluate(p), other.evaluate(p)), self.n,
                               self.smooth and other.smooth, gradient=grad,
                               name=f"({self.name}{sym}{other.name})")
        c = float(other)
        grad = None
        if g1 is not None:
            if sym in "+-":
                grad = g1
            elif sym == "*":
                grad = lambda p: c * g1(p)  # noqa: E731
            elif sym == "/":
                grad = lambda p: g1(p) / c  # noqa: E731
        return ScalarField(lambda p: op(self.evaluate(p), c), self.n, self.smooth,
                           gradient=grad, name=f"({self.name}{sym}{c:g})")

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return self._combine(other, np.divide, "/")

    def __neg__(self):
        g = self.gradient
        return ScalarField(lambda p: -self.evaluate(p), self.n, self.smooth,
                           gradient=None if g is None else (lambda p: -g(p)),
                           name=f"-{self.name}")

    def __pow__(self, a):
        a = float(a)
        return ScalarField(lambda p: np.power(self.evaluate(p), a), self.n, self.smooth,
                           name=f"{self.name}^{a:g}")

    def map(self, fn: Callable[[np.ndarray], np.ndarray], name: str, smooth: bool | None = None):
        return ScalarField(lambda p: fn(self.evaluate(p)), self.n,
                           self.smooth if smooth is None else smooth, name=f"{name}({self.name})")

    def exp(self):
        return self.map(np.exp, "exp")

    def log(self):
        return self.map(np.log, "log")

    def abs(self):
        return self.map(np.abs, "abs", smooth=False)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector(s) at base point(s), as ambient components."""

    base: np.ndarray
    components: np.ndarray

    @property
    def norm(self) -> np.ndarray | float:
        nrm = np.linalg.norm(self.components, axis=-1)
        return float(nrm) if np.ndim(nrm) == 0 else nrm


# ---------------------------------------------------------------------------
# closed-form building blocks

def constant(n: int, c: float) -> ScalarField:
    c = float(c)
    return ScalarField(lambda p: np.full(p.shape[0], c), n,
                       gradient=lambda p: np.zeros_like(p), name=f"{c:g}")


def coordinate(n: int, i: int) -> ScalarField:
    """The ambient coordinate x_i (0-based) restricted to S^n."""
    if not 0 <= i <= n:
        raise InvalidArgumentError(f"coordinate index {i} out of range for S^{n}")

    def grad(p):
        e = np.zeros_like(p)
        e[:, i] = 1.0
        return e - p[:, i:i + 1] * p

    return ScalarField(lambda p: p[:, i].copy(), n, gradient=grad, name=f"x{i}")


def distance_to(point) -> ScalarField:
    """Geodesic distance to a fixed point; Lipschitz, singular at the point
    and its antipode."""
    q = check_unit(np.asarray(point, dtype=float))
    n = q.size - 1
    return ScalarField(lambda p: np.arccos(np.clip(p @ q, -1.0, 1.0)), n, smooth=False,
                       name="dist")


def smooth_bump(s: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere; equals 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


def cubic_bump(s: np.ndarray) -> np.ndarray:
    """(1 - s^2)_+^3, a C^2 nonnegative bump."""
    s = np.asarray(s, dtype=float)
    return np.clip(1.0 - s * s, 0.0, None) ** 3


def bump_test_function(center, rho: float) -> ScalarField:
    """Radial test function (1 - (d(., center)/rho)^2)_+^3."""
    q = check_unit(np.asarray(center, dtype=float))
    n = q.size - 1
    if rho <= 0:
        raise InvalidArgumentError("bump radius must be positive")

    def func(p):
        d = np.arccos(np.clip(p @ q, -1.0, 1.0))
        return cubic_bump(d / rho)

    def grad(p):
        c = np.clip(p @ q, -1.0, 1.0)
        d = np.arccos(c)
        s = d / rho
        inner = np.clip(1.0 - s * s, 0.0, None)
        # d/dd of the profile is -6 d / rho^2 (1 - s^2)^2; grad d = -(q - c p)/sin d
        dprof = -6.0 * d / rho ** 2 * inner ** 2
        sin_d = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        ratio = np.where(sin_d > 1e-12, d / np.where(sin_d > 1e-12, sin_d, 1.0), 1.0)
        tang = q[None, :] - c[:, None] * p
        return (6.0 / rho ** 2 * inner ** 2 * ratio)[:, None] * tang * (dprof != 0)[:, None]

    return ScalarField(func, n, gradient=grad, name=f"bump(rho={rho:g})")


def bump_family(n: int, centers=None, radii=(0.6, 1.2), include_constant: bool = True
                ) -> list[ScalarField]:
    """Nonnegative W^{1,2} test functions: radial cubic bumps over a grid of
    centres and radii, plus the constant 1."""
    if centers is None:
        centers = []
        for i in range(n + 1):
            for sgn in (1.0, -1.0):
                e = np.zeros(n + 1)
                e[i] = sgn
                centers.append(e)
    family = [bump_test_function(c, r) for c in centers for r in radii]
    if include_constant:
        family.append(constant(n, 1.0))
    return family


# ---------------------------------------------------------------------------
# expression grammar

_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tanh": np.tanh, "abs": np.abs, "bump": smooth_bump, "cbump": cubic_bump,
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def parse_field(expr: str, n: int) -> ScalarField:
    """Compile a closed-form expression into a field on S^n.

    Grammar: numbers, ``pi``, ``x0`` .. ``xn``, ``+ - * / **`` (``^`` is
    accepted for powers), ``exp log sqrt sin cos tanh abs pow``,
    ``dist([a, b, ...])`` (geodesic distance to a point, normalised),
    ``bump(s)`` (smooth, support |s| < 1) and ``cbump(s)`` ((1-s^2)_+^3).
    """
    tree = ast.parse(expr.replace("^", "**"), mode="eval")

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda p: np.full(p.shape[0], v)
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return lambda p: np.full(p.shape[0], math.pi)
            if node.id.startswith("x") and node.id[1:].isdigit():
                i = int(node.id[1:])
                if i > n:
                    raise InvalidArgumentError(f"{node.id} not defined on S^{n}")
                return lambda p: p[:, i]
            raise InvalidArgumentError(f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda p: sign * inner(p)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            return lambda p: op(left(p), right(p))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            name = node.func.id
            if name == "dist":
                if len(node.args) != 1 or not isinstance(node.args[0], (ast.List, ast.Tuple)):
                    raise InvalidArgumentError("dist() takes one point literal")
                q = np.array([float(ast.literal_eval(e)) for e in node.args[0].elts])
                if q.size != n + 1:
                    raise InvalidArgumentError("dist() point has wrong dimension")
                q = q / np.linalg.norm(q)
                return lambda p: np.arccos(np.clip(p @ q, -1.0, 1.0))
            if name == "pow":
                base, ex = (build(a) for a in node.args)
                return lambda p: np.power(base(p), ex(p))
            if name in _FUNCS and len(node.args) == 1:
                fn, arg = _FUNCS[name], build(node.args[0])
                return lambda p: fn(arg(p))
            raise InvalidArgumentError(f"unknown function {name!r}")
        raise InvalidArgumentError(f"unsupported syntax in {expr!r}")

    func = build(tree)
    return ScalarField(lambda p: np.asarray(func(p), dtype=float), n, name=expr)


# ---------------------------------------------------------------------------
# calculus

def _stencil(field: ScalarField, pts: np.ndarray, h: float, laplacian: bool):
    d = pts.shape[1]
    center = field.evaluate(pts)
    grad = np.empty_like(pts)
    lap = np.zeros(pts.shape[0]) if laplacian else None
    for k in range(d):
        shifted = pts.copy()
        shifted[:, k] += h
        fp = field.evaluate(shifted / np.linalg.norm(shifted, axis=1, keepdims=True))
        shifted[:, k] -= 2.0 * h
        fm = field.evaluate(shifted / np.linalg.norm(shifted, axis=1, keepdims=True))
        grad[:, k] = (fp - fm) / (2.0 * h)
        if laplacian:
            lap += fp - 2.0 * center + fm
    # project out the residual radial component
    grad -= np.sum(grad * pts, axis=1, keepdims=True) * pts
    if laplacian:
        lap /= h * h
    return center, grad, lap


def derivatives(field: ScalarField, points, h: float = DEFAULT_H, laplacian: bool = True):
    """Values, intrinsic gradients and Laplace-Beltrami at rows of ``points``.

    Second-order central differences with step ``h`` on every ambient axis.
    Returns ``(values, gradients, laplacians)``; ``laplacians`` is None when
    ``laplacian`` is False.
    """
    if not 0.0 < h <= 1e-2:
        raise InvalidArgumentError(f"finite-difference step must lie in (0, 1e-2], got {h}")
    pts = check_unit(_as_points(points))
    vals, grads, laps = [], [], []
    for start in range(0, pts.shape[0], CHUNK):
        v, g, lp = _stencil(field, pts[start:start + CHUNK], h, laplacian)
        vals.append(v)
        grads.append(g)
        if laplacian:
            laps.append(lp)
    return (np.concatenate(vals), np.concatenate(grads),
            np.concatenate(laps) if laplacian else None)


def intrinsic_gradient(field: ScalarField, p, h: float = DEFAULT_H) -> TangentVector:
    p_arr = np.asarray(p, dtype=float)
    _, g, _ = derivatives(field, p_arr, h, laplacian=False)
    if p_arr.ndim == 1:
        return TangentVector(p_arr, g[0])
    return TangentVector(p_arr, g)


def laplace_beltrami(field: ScalarField, p, h: float = DEFAULT_H):
    p_arr = np.asarray(p, dtype=float)
    _, _, lap = derivatives(field, p_arr, h)
    return float(lap[0]) if p_arr.ndim == 1 else lap


def gradients(field: ScalarField, points, h: float = DEFAULT_H) -> np.ndarray:
    """Intrinsic gradients, from the closed form when the field carries one."""
    pts = check_unit(_as_points(points))
    if field.gradient is not None:
        g = np.asarray(field.gradient(pts), dtype=float)
        return g - np.sum(g * pts, axis=1, keepdims=True) * pts
    return derivatives(field, pts, h, laplacian=False)[1]


def gradient_norm_squared(field: ScalarField, sampling: SphereSampling,
                          h: float = DEFAULT_H) -> np.ndarray:
    g = gradients(field, sampling.points, h)
    return np.sum(g * g, axis=1)


# ---------------------------------------------------------------------------
# integration

def _values(field_or_values, sampling: SphereSampling) -> np.ndarray:
    if isinstance(field_or_values, ScalarField):
        if field_or_values.n != sampling.n:
            raise InvalidArgumentError("field and sampling dimensions differ")
        return field_or_values.evaluate(sampling.points)
    vals = np.asarray(field_or_values, dtype=float)
    if vals.shape != sampling.weights.shape:
        raise InvalidArgumentError("value array does not match the sampling")
    return vals


def integrate(field, sampling: SphereSampling) -> float:
    """Quadrature sum of a field (or of precomputed values) over a sampling."""
    return float(sampling.weights @ _values(field, sampling))


def lp_norm(field, sampling: SphereSampling, p: float) -> float:
    if p < 1:
        raise InvalidArgumentError(f"L^p norm needs p >= 1, got {p}")
    vals = np.abs(_values(field, sampling))
    return float((sampling.weights @ vals ** p) ** (1.0 / p))


def spherical_mean(field: ScalarField, cap: CapSampling) -> float:
    """Average of a field over a geodesic sphere."""
    if cap.weights.size == 0:
        raise InvalidArgumentError("empty cap sampling")
    vals = field.evaluate(cap.points)
    return float(cap.weights @ vals / cap.weights.sum())


def spherical_mean_stderr(field: ScalarField, cap: CapSampling) -> tuple[float, float]:
    """Mean and its standard error; the error is 0 for deterministic caps."""
    vals = field.evaluate(cap.points)
    mean = float(cap.weights @ vals / cap.weights.sum())
    if cap.kind != "monte-carlo" or vals.size < 2:
        return mean, 0.0
    return mean, float(np.std(vals, ddof=1) / math.sqrt(vals.size))


def cap_for(x, r: float, cap_count: int | None, seed: int | None,
            cap_resolution: int | None) -> CapSampling:
    """Cap with a seed derived from (seed, centre, radius) when random."""
    child = None if cap_resolution is not None else derive_seed(seed or 0, x, r)
    return geodesic_sphere_sampling(x, r, count=cap_count, seed=child, resolution=cap_resolution)


@dataclass(frozen=True, eq=False)
class BallRule:
    """Polar quadrature for a geodesic ball: radial nodes times cap samples."""

    center: np.ndarray
    radius: float
    radii: np.ndarray          # (K,)
    shell_weights: np.ndarray  # (K,) radial weight times sphere area
    points: np.ndarray         # (K, M, n+1)
    cap_weights: np.ndarray    # (K, M), rows sum to 1

    @property
    def volume(self) -> float:
        return float(self.shell_weights.sum())

    def shell_means(self, field: ScalarField) -> np.ndarray:
        k, m, d = self.points.shape
        vals = field.evaluate(self.points.reshape(-1, d)).reshape(k, m)
        return np.sum(vals * self.cap_weights, axis=1)

    def integral(self, field: ScalarField, drift: float = 0.0) -> float:
        means = self.shell_means(field) - drift * self.radii
        return float(self.shell_weights @ means)

    def average(self, field: ScalarField, drift: float = 0.0) -> float:
        return self.integral(field, drift) / self.volume


def ball_rule(x, r: float, radial_steps: int = 48, cap_count: int | None = 256,
              seed: int | None = 0, cap_resolution: int | None = None,
              r_min: float = 0.0) -> BallRule:
    """Gauss-Legendre nodes in [r_min, r] times a cap rule on each shell.

    Random caps use an independent seed per shell, derived from the base
    seed, the centre and the shell radius.
    """
    x = check_unit(np.asarray(x, dtype=float))
    if not 0.0 <= r_min < r <= math.pi:
        raise InvalidArgumentError("ball radius out of range")
    n = x.size - 1
    t, wt = np.polynomial.legendre.leggauss(radial_steps)
    radii = r_min + (t + 1.0) * (r - r_min) / 2.0
    shell_w = wt * (r - r_min) / 2.0 * sphere_volume(n - 1) * np.sin(radii) ** (n - 1)
    pts, cw = [], []
    for s in radii:
        cap = cap_for(x, float(s), cap_count, seed, cap_resolution)
        pts.append(cap.points)
        cw.append(cap.weights / cap.weights.sum())
    return BallRule(x, float(r), radii, shell_w, np.stack(pts), np.stack(cw))


def ball_average(field: ScalarField, x, r: float, radial_steps: int = 48,
                 cap_count: int | None = 256, seed: int | None = 0,
                 cap_resolution: int | None = None, drift: float = 0.0) -> float:
    """Average over B_r(x) of ``field - drift * d(., x)`` in polar form."""
    if not 0.0 < r < math.pi / 2:
        raise InvalidArgumentError(f"ball radius must lie in (0, pi/2), got {r}")
    rule = ball_rule(x, r, radial_steps, cap_count, seed, cap_resolution)
    return rule.average(field, drift)
