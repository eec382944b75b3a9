"""Canonical conformal factors and sequences with known ground truth."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np

from .conformal import ConformalFactor, HypothesisBounds, jsonable
from .errors import InvalidArgumentError
from .fields import ScalarField, constant, coordinate, parse_field, smooth_bump
from .sphere import (SphereSampling, basis_vector, check_unit, polar_sphere_sampling,
                     product_sphere_sampling, qmc_sphere_sampling)

SCENARIOS = ("round", "bubble", "perturbation", "spike")
SPIKE_FLANK = (0.25, 0.5, 0.7, 0.8, 0.85, 0.9, 0.95, 1.0)


@dataclass
class FactorSequence:
    """Finite prefix f_1, ..., f_J of a sequence with a candidate limit."""

    factors: list
    limit: ConformalFactor | None = None
    bounds: HypothesisBounds | None = None
    sampling: SphereSampling | None = None
    seed: int = 0
    name: str = "sequence"
    parameters: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.factors:
            raise InvalidArgumentError("a factor sequence needs at least one entry")
        dims = {cf.n for cf in self.factors}
        if self.limit is not None:
            dims.add(self.limit.n)
        if len(dims) != 1:
            raise InvalidArgumentError("all factors must share one dimension")

    @property
    def n(self) -> int:
        return self.factors[0].n

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, j):
        return self.factors[j]


# ---------------------------------------------------------------------------

def round_scenario(n: int, c: float = 0.0) -> ConformalFactor:
    return ConformalFactor(constant(n, c), name=f"round(c={c:g})")


def bubble_field(n: int, lam: float, P=None) -> ScalarField:
    """f_lam for the dilation by lam about the projection pole P.

    With s = <p, P>, e^{f} = 2 lam / (1 + lam^2 + (lam^2 - 1) s), which is
    the tan(d/2) form rewritten through the half-angle identity. The factor
    equals lam at -P (where volume concentrates) and 1/lam at P.
    """
    if lam < 1:
        raise InvalidArgumentError("bubble parameter must satisfy lambda >= 1")
    P = basis_vector(n, 0) if P is None else check_unit(np.asarray(P, dtype=float))
    if P.size != n + 1:
        raise InvalidArgumentError("pole dimension mismatch")
    a, b = 1.0 + lam * lam, lam * lam - 1.0
    log2l = math.log(2.0 * lam)

    def func(p):
        return log2l - np.log(a + b * (p @ P))

    def grad(p):
        s = p @ P
        return (-b / (a + b * s))[:, None] * (P[None, :] - s[:, None] * p)

    return ScalarField(func, n, gradient=grad, name=f"bubble(lambda={lam:g})")


def bubble_scenario(n: int, lam: float, P=None) -> ConformalFactor:
    return ConformalFactor(bubble_field(n, lam, P), name=f"bubble(lambda={lam:g})")


def concentration_point(n: int, P=None) -> np.ndarray:
    P = basis_vector(n, 0) if P is None else check_unit(np.asarray(P, dtype=float))
    return -P


def bubble_sequence(n: int, lambdas: Sequence[float], P=None) -> FactorSequence:
    return FactorSequence([bubble_scenario(n, lam, P) for lam in lambdas], name="bubble",
                          parameters={"lambdas": list(lambdas)})


def default_amplitudes(J: int, a0: float = 0.3) -> list[float]:
    return [a0 * 2.0 ** (-j) for j in range(1, J + 1)]


def perturbation_scenario(n: int, f_inf: ScalarField | None = None,
                          psi: ScalarField | None = None,
                          amplitudes: Sequence[float] | None = None,
                          J: int = 8) -> FactorSequence:
    """f_j = f_inf + a_j psi with candidate limit f_inf."""
    f_inf = constant(n, 0.0) if f_inf is None else f_inf
    psi = coordinate(n, 0) if psi is None else psi
    amps = default_amplitudes(J) if amplitudes is None else [float(a) for a in amplitudes]
    if any(abs(b) > abs(a) for a, b in zip(amps, amps[1:])):
        raise InvalidArgumentError("amplitudes must decrease in absolute value")
    factors = [ConformalFactor(f_inf + a * psi, name=f"perturbation(a={a:g})") for a in amps]
    return FactorSequence(factors, ConformalFactor(f_inf, name="perturbation-limit"),
                          name="perturbation", parameters={"amplitudes": amps})


def spike_field(n: int, center, height: float, width: float,
                base: ScalarField | None = None) -> ScalarField:
    """base + height * chi(d(., center) / width) with the smooth bump chi."""
    q = check_unit(np.asarray(center, dtype=float))
    if width <= 0:
        raise InvalidArgumentError("spike width must be positive")

    def bump(p):
        c = np.clip(p @ q, -1.0, 1.0)
        return height * smooth_bump(np.arccos(c) / width)

    def grad(p):
        c = np.clip(p @ q, -1.0, 1.0)
        d = np.arccos(c)
        s = d / width
        chi = smooth_bump(s)
        inside = chi > 0
        dchi = np.zeros_like(s)
        si = s[inside]
        dchi[inside] = chi[inside] * (-2.0 * si / (1.0 - si * si) ** 2)
        sin_d = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        safe = np.where(sin_d > 1e-300, sin_d, 1.0)
        # grad d = -(q - c p) / sin d
        coef = np.where(inside & (sin_d > 0), -height * dchi / width / safe, 0.0)
        return coef[:, None] * (q[None, :] - c[:, None] * p)

    spike = ScalarField(bump, n, gradient=grad, name=f"spike(h={height:g},w={width:g})")
    return spike if base is None else base + spike


def spike_scenario(n: int, f_inf: ScalarField | None = None, center=None,
                   heights: Sequence[float] | None = None,
                   widths: Sequence[float] | None = None, J: int = 5) -> FactorSequence:
    """f_j = f_inf + h_j chi(d(x, center) / w_j), defaults h_j = 1, w_j = 4^{-j}, j = 1..J."""
    f_inf = constant(n, 0.0) if f_inf is None else f_inf
    center = basis_vector(n, 0) if center is None else check_unit(np.asarray(center, float))
    widths = [4.0 ** (-j) for j in range(1, J + 1)] if widths is None else list(widths)
    heights = [1.0] * len(widths) if heights is None else list(heights)
    if len(heights) != len(widths):
        raise InvalidArgumentError("heights and widths differ in length")
    if any(w <= 0 for w in widths) or any(b >= a for a, b in zip(widths, widths[1:])):
        raise InvalidArgumentError("widths must be positive and strictly decreasing")
    factors = [ConformalFactor(spike_field(n, center, h, w, f_inf),
                               name=f"spike(h={h:g},w={w:g})") for h, w in zip(heights, widths)]
    return FactorSequence(factors, ConformalFactor(f_inf, name="spike-limit"), name="spike",
                          parameters={"heights": heights, "widths": widths,
                                      "center": list(map(float, center))})


def collapse_sequence(n: int, J: int = 5) -> FactorSequence:
    """u_j = 1/j, a constant sequence of factors shrinking to zero."""
    k = 2.0 / (n - 2)
    factors = [ConformalFactor(constant(n, k * math.log(1.0 / j)), name=f"collapse(j={j})")
               for j in range(1, J + 1)]
    return FactorSequence(factors, name="collapse", parameters={"J": J})


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ScenarioSpec:
    """Serializable description of a scenario.

    ``params`` keys by scenario: round ``c``; bubble ``lambda``, ``pole``;
    perturbation ``f_inf``, ``psi`` (expressions), ``amplitudes``;
    spike ``f_inf``, ``center``, ``heights``, ``widths``.
    """

    name: str
    n: int = 3
    params: dict = dc_field(default_factory=dict)
    J: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise InvalidArgumentError(f"unknown scenario {self.name!r}")
        if self.n < 3:
            raise InvalidArgumentError("scenarios need n >= 3")
        if self.J < 1:
            raise InvalidArgumentError("sequence length J must be >= 1")
        lam = self.params.get("lambda", 1.0)
        if self.name == "bubble" and lam < 1:
            raise InvalidArgumentError("bubble parameter must satisfy lambda >= 1")
        widths = self.params.get("widths")
        if widths is not None and (any(w <= 0 for w in widths)
                                   or any(b >= a for a, b in zip(widths, widths[1:]))):
            raise InvalidArgumentError("widths must be positive and strictly decreasing")

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        known = {"name", "n", "params", "J", "seed"}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(data["name"], int(data.get("n", 3)), dict(data.get("params", {})),
                   int(data.get("J", 5)), int(data.get("seed", 0)))

    @classmethod
    def load(cls, path) -> "ScenarioSpec":
        path = Path(path)
        if path.suffix.lower() != ".json":
            raise InvalidArgumentError("scenario configuration files must be JSON")
        return cls.from_dict(json.loads(path.read_text()))

    def to_dict(self) -> dict:
        return jsonable({"name": self.name, "n": self.n, "params": self.params,
                         "J": self.J, "seed": self.seed})

    def _expr(self, key: str, default: ScalarField) -> ScalarField:
        expr = self.params.get(key)
        return default if expr is None else parse_field(str(expr), self.n)

    def factor(self) -> ConformalFactor:
        """Single factor: the scenario itself or, for sequences, its first entry."""
        if self.name == "round":
            return round_scenario(self.n, float(self.params.get("c", 0.0)))
        if self.name == "bubble":
            return bubble_scenario(self.n, float(self.params.get("lambda", 2.0)),
                                   self.params.get("pole"))
        return self.sequence().factors[0]

    def sequence(self) -> FactorSequence:
        n = self.n
        if self.name == "round":
            return FactorSequence([self.factor()] * self.J, self.factor(), name="round")
        if self.name == "bubble":
            lam = float(self.params.get("lambda", 2.0))
            lambdas = self.params.get("lambdas") or [lam ** (j + 1) for j in range(self.J)]
            return bubble_sequence(n, lambdas, self.params.get("pole"))
        if self.name == "perturbation":
            amps = self.params.get("amplitudes") or default_amplitudes(
                self.J, float(self.params.get("a0", 0.3)))
            return perturbation_scenario(n, self._expr("f_inf", constant(n, 0.0)),
                                         self._expr("psi", coordinate(n, 0)), amps)
        return spike_scenario(n, self._expr("f_inf", constant(n, 0.0)),
                              self.params.get("center"), self.params.get("heights"),
                              self.params.get("widths"), self.J)


def recommended_sampling(spec: ScenarioSpec, resolution: int | None = None,
                         samples: int | None = None) -> SphereSampling:
    """A quadrature suited to the scenario's features.

    Smooth scenarios use a rotated product rule (n <= 5) or scrambled Sobol
    points; bubbles with large lambda and spikes use a polar rule about the
    point where the factor varies fastest.
    """
    n = spec.n
    if spec.name == "spike":
        seq = spec.sequence()
        widths = seq.parameters["widths"]
        center = seq.parameters["center"]
        # dense radial nodes across each spike's flank, where level bands live
        breaks = [w * s for w in widths for s in SPIKE_FLANK]
        return polar_sphere_sampling(n, center, breakpoints=breaks,
                                     radial_nodes=resolution or 400, cap_resolution=4)
    if spec.name == "bubble" and float(spec.params.get("lambda", 2.0)) > 4:
        pole = spec.params.get("pole")
        return polar_sphere_sampling(n, concentration_point(n, pole),
                                     breakpoints=(0.5 / float(spec.params["lambda"]), 0.5),
                                     radial_nodes=resolution or 48, cap_resolution=8)
    if samples is not None or n > 5:
        return qmc_sphere_sampling(n, samples or 1 << 16, spec.seed)
    return product_sphere_sampling(n, resolution or {3: 64, 4: 24, 5: 12}[n],
                                   rotation_seed=spec.seed)
