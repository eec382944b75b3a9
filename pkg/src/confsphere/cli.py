"""Batch verification entry point.

Verbs: ``verify`` runs suites and writes a report bundle, ``constants``
prints the dimensional constants, ``scenario-dump`` writes a scenario and its
sampled values, ``plot`` renders SVGs from a bundle.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .conformal import (HypothesisBounds, curvature_report, gradient_l2_bound_check, jsonable,
                        total_scalar_curvature, volume, w1q_bound_check,
                        weighted_gradient_bound_check)
from .errors import (DimensionError, HypothesisNotMetError, InvalidArgumentError,
                     MissingBoundError, RangeError, SelectionFailure)
from .fields import DEFAULT_H, bump_family
from .means import (ball_average_monotonicity_check, constants, elementary_ratio_high,
                    elementary_ratio_low, phi_derivative_identity_check,
                    pointwise_lower_bound_check, select_variant,
                    spherical_mean_monotonicity_check)
from .scenarios import SCENARIOS, ScenarioSpec, concentration_point, recommended_sampling
from .sequence import convergence_report, limit_weak_psc_check, singular_set_decompose
from .sphere import basis_vector, qmc_sphere_sampling, radial_grid, sphere_volume
from .truncation import (essential_infimum, log_gradient_bound_check, regular_value_select,
                         truncate, truncation_w12_bound_check, truncation_weak_inequality_check,
                         uniform_lower_bound_experiment)

SUITES = ("regularity", "spherical-mean", "truncation", "singular-set", "total-scalar")
PLOT_KINDS = ("phi-profile", "tau-scan", "convergence")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class Skip(Exception):
    """A check whose hypotheses do not hold for the scenario."""


@dataclass
class SuiteRun:
    suite: str
    scenario: ScenarioSpec
    seed: int = 0
    out: Path | None = None
    h: float = DEFAULT_H
    tol: float = 0.01
    samples: int | None = None
    resolution: int | None = None
    variant: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.suite not in SUITES + ("all",):
            raise UsageError(f"unknown suite {self.suite!r}; choose from {SUITES + ('all',)}")
        if not 0 < self.h <= 1e-2:
            raise UsageError("--h must lie in (0, 1e-2]")
        if self.tol <= 0:
            raise UsageError("--tol must be positive")

    def to_dict(self) -> dict:
        return {"suite": self.suite, "scenario": self.scenario.to_dict(), "seed": self.seed,
                "h": self.h, "tol": self.tol, "samples": self.samples,
                "resolution": self.resolution, "variant": self.variant}


class Context:
    """Shared objects for one run: sampling, factors, hypothesis bounds."""

    def __init__(self, run: SuiteRun):
        self.run = run
        spec = run.scenario
        self.spec = spec
        self.n = spec.n
        if run.samples is not None:
            self.sampling = qmc_sphere_sampling(spec.n, run.samples, run.seed)
        else:
            self.sampling = recommended_sampling(spec, run.resolution)
        self.seq = spec.sequence() if spec.name in ("perturbation", "spike") else None
        self.factors = self.seq.factors if self.seq is not None else [spec.factor()]
        step = max(1, len(self.sampling) // 1000)
        self.probes = self.sampling.points[::step]
        self._psc = {}
        self._bounds = None

    @property
    def center(self) -> np.ndarray:
        if self.spec.name == "bubble":
            return concentration_point(self.n, self.spec.params.get("pole"))
        if self.spec.name == "spike" and self.spec.params.get("center") is not None:
            return np.asarray(self.spec.params["center"], float)
        return basis_vector(self.n, 0)

    def psc(self, j: int) -> dict:
        if j not in self._psc:
            rep = curvature_report(self.factors[j], self.probes, self.run.h)
            self._psc[j] = rep.to_dict()
        return self._psc[j]

    def require_psc(self, j: int) -> None:
        rep = self.psc(j)
        if rep["verdict"] != "pass":
            raise Skip(f"factor {j} has negative scalar curvature (min {rep['min']:.4g})")

    def bounds(self) -> HypothesisBounds:
        """V, Lambda, alpha from the scenario parameters or from defaults
        (V = 2 omega_n, Lambda = 2 omega_n^{1-alpha}, alpha = 1/2), and R0 as
        the largest total scalar curvature along the scenario."""
        if self._bounds is None:
            p = self.spec.params
            om = sphere_volume(self.n)
            alpha = float(p.get("alpha", 0.5))
            R0 = p.get("R0")
            if R0 is None:
                R0 = max(total_scalar_curvature(cf, self.sampling, self.run.h).lhs
                         for cf in self.factors)
            self._bounds = HypothesisBounds(V=float(p.get("V", 2 * om)),
                                            Lambda=float(p.get("Lambda", 2 * om ** (1 - alpha))),
                                            alpha=alpha, R0=float(R0))
        return self._bounds


Task = tuple  # (suite, key, thunk returning a list of records)


def _record(rep, **extra) -> dict:
    d = rep.to_dict() if hasattr(rep, "to_dict") else dict(rep)
    d.update(extra)
    return d


# ---------------------------------------------------------------------------
# suites; each returns a list of (suite, key, thunk) tasks

def suite_regularity(ctx: Context) -> list[Task]:
    n, h = ctx.n, ctx.run.h
    qs = 1.6 if n == 3 else 0.5 * (n / (n - 1) + 4 * n / (3 * n - 2))
    tasks = []
    for j, cf in enumerate(ctx.factors):
        def t(j=j, cf=cf):
            ctx.require_psc(j)
            V = ctx.bounds().V
            vol = volume(cf, ctx.sampling)
            if vol > V:
                raise Skip(f"factor {j} volume {vol:.6g} exceeds V={V:.6g}")
            tag = {"factor": j, "precondition": ctx.psc(j)}
            out = [_record(gradient_l2_bound_check(cf, ctx.sampling, h), **tag)]
            out += [_record(weighted_gradient_bound_check(cf, p, V, ctx.sampling, h), **tag)
                    for p in (0.0, 0.25)]
            out.append(_record(w1q_bound_check(cf, qs, V, ctx.sampling, h), **tag))
            return out
        tasks.append(("regularity", j, t))
    return tasks


def suite_total_scalar(ctx: Context) -> list[Task]:
    tasks = []
    for j, cf in enumerate(ctx.factors):
        def t(j=j, cf=cf):
            rep = total_scalar_curvature(cf, ctx.sampling, ctx.run.h, ctx.run.tol)
            return [_record(rep, factor=j, volume=volume(cf, ctx.sampling))]
        tasks.append(("total-scalar", j, t))
    return tasks


def suite_spherical_mean(ctx: Context) -> list[Task]:
    n, h, seed = ctx.n, ctx.run.h, ctx.run.seed
    variant = select_variant(n, ctx.run.variant)
    grid500 = np.linspace(math.pi / 1000, math.pi / 2, 500)
    cf = ctx.factors[0]
    u, x = cf.u, ctx.center
    tasks = []
    if n in (3, 4):
        tasks.append(("spherical-mean", "ratio-low", lambda: [_record(elementary_ratio_low(n, grid500))]))
    tasks.append(("spherical-mean", "ratio-high", lambda: [_record(elementary_ratio_high(n, grid500))]))

    def identity():
        steps = 800 if ctx.spec.name == "spike" else 48
        return [_record(phi_derivative_identity_check(u, x, r, h, tol=ctx.run.tol, seed=seed,
                                                      radial_steps=steps))
                for r in (0.3, 0.7, 1.2)]

    def mono():
        ctx.require_psc(0)
        rep = spherical_mean_monotonicity_check(u, None, x, radial_grid(24), ctx.sampling,
                                                seed=seed, variant=variant)
        return [_record(rep, series={"phi-profile": rep.details["profile"]})]

    def pointwise():
        ctx.require_psc(0)
        return [_record(pointwise_lower_bound_check(u, x, 0.5, ctx.sampling, seed=seed,
                                                    variant=variant)),
                _record(ball_average_monotonicity_check(u, None, x, 0.3, 0.6, ctx.sampling,
                                                        variant=variant, seed=seed))]
    tasks += [("spherical-mean", "identity", identity), ("spherical-mean", "monotonicity", mono),
              ("spherical-mean", "pointwise", pointwise)]
    return tasks


def suite_truncation(ctx: Context) -> list[Task]:
    n, h = ctx.n, ctx.run.h
    C = n * (n - 2) / 4.0
    cf = ctx.factors[0]
    u = cf.u

    def single():
        ctx.require_psc(0)
        vals = u.evaluate(ctx.sampling.points)
        lo, hi = float(vals.min()), float(vals.max())
        target = 0.5 * (lo + hi) if hi - lo > 1e-6 * hi else 1.2 * hi
        try:
            K = regular_value_select([u], target, ctx.sampling, h)
        except SelectionFailure as exc:
            raise Skip(str(exc)) from exc
        t = truncate(u, K)
        out = [_record(log_gradient_bound_check(u, C, ctx.sampling, h)),
               _record(truncation_w12_bound_check(t, C, ctx.sampling, h))]
        out += [_record(truncation_weak_inequality_check(t, phi, C, ctx.sampling, h))
                for phi in bump_family(n)]
        inf = essential_infimum(u, ctx.sampling, values=vals)
        out[0]["essential_infimum"] = inf.to_dict()
        return out
    tasks = [("truncation", "single", single)]
    if ctx.seq is not None:
        def lower():
            for j in range(len(ctx.factors)):
                ctx.require_psc(j)
            seq = ctx.seq
            u_inf = seq.limit.u
            e_inf = essential_infimum(u_inf, ctx.sampling).estimate
            res = uniform_lower_bound_experiment([f.u for f in seq.factors], u_inf,
                                                 ctx.bounds().V, e_inf, ctx.sampling,
                                                 np.linspace(0.05, 1.5, 30))
            i0 = res["i0"]
            last = len(seq.factors) - 1
            return [{"check": "uniform-lower-bound", "n": n,
                     "lhs": i0 if i0 is not None else math.inf, "rhs": last,
                     "relation": "<=", "tolerance": 0.0,
                     "slack": (last - i0) if i0 is not None else -math.inf,
                     "verdict": "pass" if i0 is not None and res["all_consistent"] else "fail",
                     "anchor": "u_i >= e_inf - ||u_i-u_inf||_1/Vol(B_r1) - c V^k <d>_r1 >= e_inf/4",
                     "details": res}]
        tasks.append(("truncation", "lower-bound", lower))
    return tasks


def suite_singular_set(ctx: Context) -> list[Task]:
    seq = ctx.seq
    if seq is None:
        if ctx.spec.name == "round":
            seq = ctx.spec.sequence()
        else:
            raise Skip("the scenario has no candidate limit")
    n, h = ctx.n, ctx.run.h
    J = len(seq.factors)

    def decompose(variant):
        def t():
            b = ctx.bounds() if variant == "u" else None
            reps = [singular_set_decompose(seq, j, variant, ctx.sampling, h, bounds=b)
                    for j in range(J)]
            out = []
            for r in reps:
                d = r.to_dict()
                chk = d["checks"]
                common = {"n": n, "factor": r.j, "variant": variant, "tolerance": 0.0}
                out.append(dict(common, check="singular-set-tau-bracket", lhs=r.tau,
                                rhs=r.bracket[1], relation="<=", slack=r.bracket[1] - r.tau,
                                verdict="pass" if chk["tau_in_bracket"] else "fail",
                                anchor="sqrt(C_j)/2 <= tau_j <= sqrt(C_j)", details=d,
                                series={"tau-scan": {"j": r.j, "variant": variant, "scan": r.scan,
                                                     "bracket": r.bracket, "tau": r.tau,
                                                     "cap": r.perimeter_cap}},
                                mask=r.bad_mask))
                cap = r.perimeter_cap * 1.05
                out.append(dict(common, check="singular-set-perimeter", lhs=r.perimeter,
                                rhs=cap, relation="<=", slack=cap - r.perimeter,
                                verdict="pass" if r.perimeter <= cap else "fail",
                                anchor="H^{n-1}({w = tau_j}) <= 2 sqrt(C_j)",
                                details={"resolved": r.resolved}))
                out.append(dict(common, check="singular-set-chebyshev", lhs=r.bad_volume,
                                rhs=r.chebyshev_bound, relation="<=",
                                slack=r.chebyshev_bound - r.bad_volume,
                                verdict="pass" if chk["chebyshev"] else "fail",
                                anchor="Vol{w > tau_j} <= int w / tau_j"))
                out.append(dict(common, check="singular-set-good-sup", lhs=r.good_sup,
                                rhs=r.tau, relation="<=", slack=r.tau - r.good_sup,
                                verdict="pass" if chk["good_set_sup"] else "fail",
                                anchor="w <= tau_j off Z_j"))
                if r.ui_bound is not None:
                    out.append(dict(common, check="singular-set-uniform-integrability",
                                    lhs=r.bad_g_volume, rhs=r.ui_bound, relation="<=",
                                    slack=r.ui_bound - r.bad_g_volume,
                                    verdict="pass" if chk["uniform_integrability"] else "fail",
                                    anchor="Vol_g(Z_j) <= Lambda Vol(Z_j)^alpha"))
            vols = [r.bad_volume for r in reps]
            worst = max([b - a for a, b in zip(vols, vols[1:])] or [0.0])
            out.append({"check": "singular-set-volume-monotone", "n": n, "variant": variant,
                        "lhs": worst, "rhs": 0.0, "relation": "<=", "tolerance": 1e-12,
                        "slack": -worst, "verdict": "pass" if worst <= 1e-12 else "fail",
                        "anchor": "j -> Vol(Z_j) non-increasing",
                        "details": {"volumes": vols, "C": [r.C for r in reps],
                                    "volume_over_C": [v / r.C if r.C > 0 else 0.0
                                                      for v, r in zip(vols, reps)]}})
            return out
        return t

    def limit_psc():
        rep = limit_weak_psc_check(seq.limit.u, bump_family(n), ctx.sampling, h)
        return [_record(rep)]

    def conv():
        rep = convergence_report(seq, ctx.sampling, (1.0, 2.0, 2.0 * n / (n - 2)),
                                 bump_family(n, radii=(1.2,), include_constant=False), h)
        d = rep.to_dict()
        return [{"check": "convergence-l2-decay", "n": n, "lhs": 0.0 if rep.decays(2.0) else 1.0,
                 "rhs": 0.0, "relation": "<=", "tolerance": 0.0,
                 "slack": 0.0 if rep.decays(2.0) else -1.0,
                 "verdict": "pass" if rep.decays(2.0) else "fail",
                 "anchor": "j -> ||u_j - u_inf||_2 non-increasing", "details": d,
                 "series": {"convergence": d}}]

    tasks = [("singular-set", "f", decompose("f"))]
    try:
        ctx.bounds()
        tasks.append(("singular-set", "u", decompose("u")))
    except (MissingBoundError, HypothesisNotMetError):
        pass
    tasks += [("singular-set", "limit-weak-psc", limit_psc), ("singular-set", "convergence", conv)]
    return tasks


SUITE_FUNCS = {"regularity": suite_regularity, "spherical-mean": suite_spherical_mean,
               "truncation": suite_truncation, "singular-set": suite_singular_set,
               "total-scalar": suite_total_scalar}


def _guard(task):
    suite, key, fn = task
    try:
        return ("ok", suite, key, fn())
    except (Skip, HypothesisNotMetError) as exc:
        return ("skip", suite, key, str(exc))


def run_suite(run: SuiteRun) -> tuple[int, dict, dict]:
    """Run the requested suites; returns (exit status, report, side outputs)."""
    ctx = Context(run)
    names = SUITES if run.suite == "all" else (run.suite,)
    tasks, skipped = [], []
    for name in names:
        try:
            tasks += [t for t in SUITE_FUNCS[name](ctx)]
        except Skip as exc:
            skipped.append({"suite": name, "reason": str(exc)})
    # bounds and curvature caches are filled up front so worker threads only read them
    for j in range(len(ctx.factors)):
        ctx.psc(j)
    with ThreadPoolExecutor(max_workers=max(1, run.workers)) as pool:
        results = list(pool.map(_guard, tasks))
    records, series, masks = [], {k: [] for k in PLOT_KINDS}, []
    for status, suite, key, payload in results:
        if status == "skip":
            skipped.append({"suite": suite, "task": str(key), "reason": payload})
            continue
        for rec in payload:
            rec = dict(rec)
            rec["suite"] = suite
            if rec.get("seed") is None:
                rec["seed"] = run.seed
            for kind, data in (rec.pop("series", None) or {}).items():
                series[kind].append(data)
            mask = rec.pop("mask", None)
            if mask is not None:
                masks.append((rec.get("variant", "f"), rec["factor"], mask))
            records.append(jsonable(rec))
    failed = [r["check"] for r in records if r["verdict"] != "pass"]
    status = EXIT_FAIL if failed else EXIT_OK
    report = {"run": run.to_dict(), "sampling": ctx.sampling.descriptor(),
              "records": records, "skipped": skipped,
              "series": {k: v for k, v in series.items() if v},
              "summary": {"checks": len(records), "failed": len(failed),
                          "failed_checks": sorted(set(failed)), "exit_status": status}}
    return status, jsonable(report), {"masks": masks, "sampling": ctx.sampling}


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_bundle(out: Path, report: dict, side: dict, argv) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report))
    meta = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(), "argv": list(argv),
            "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "platform": platform.platform()}
    (out / "metadata.json").write_text(dumps(meta))
    for i, prof in enumerate(report["series"].get("phi-profile", [])):
        _write_rows(out / f"phi-profile-{i}.csv", ["r", "phi", "phi_minus_Kr", "stderr"],
                    zip(prof["r"], prof["phi"], prof["phi_minus_Kr"], prof["stderr"]))
    pts = side["sampling"].points
    for variant, j, mask in side["masks"]:
        _write_rows(out / f"bad-set-{variant}-{j}.csv", [f"x{i}" for i in range(pts.shape[1])],
                    pts[mask].tolist())


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# plots

def emit_plots(report: dict, kinds, out: Path) -> list[Path]:
    """One SVG per series of each requested kind."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "confsphere"
    series = report.get("series", {})
    missing = [k for k in kinds if not series.get(k)]
    if missing:
        raise InvalidArgumentError(f"report has no series for {missing}")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in kinds:
        for i, data in enumerate(series[kind]):
            fig, ax = plt.subplots(figsize=(6, 4))
            if kind == "phi-profile":
                ax.plot(data["r"], data["phi"], label="phi(r)")
                ax.plot(data["r"], data["phi_minus_Kr"], label="phi(r) - K r")
                ax.set_xlabel("r")
            elif kind == "tau-scan":
                scan = np.asarray(data["scan"], dtype=float)
                if scan.size:
                    ax.plot(scan[:, 0], scan[:, 1], marker="o", label="level-set area")
                for b in data["bracket"]:
                    ax.axvline(b, color="grey", linestyle="--")
                ax.axhline(data["cap"], color="red", linestyle=":", label="2 sqrt(C_j)")
                ax.axvline(data["tau"], color="black", label="tau_j")
                ax.set_xlabel("tau")
                ax.set_title(f"{data.get('variant', 'f')}-variant, j = {data['j']}")
            else:
                for p, d in sorted(data["distances"].items()):
                    ax.semilogy(range(len(d)), np.maximum(d, 1e-300), marker="o",
                                label=f"p = {float(p):g}")
                ax.set_xlabel("j")
            ax.legend()
            fig.tight_layout()
            path = out / f"{kind}-{i}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# argument handling

def _scenario_from_args(args) -> ScenarioSpec:
    if args.config:
        try:
            spec = ScenarioSpec.load(args.config)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise UsageError(f"cannot read configuration: {exc}") from exc
        data = spec.to_dict()
    else:
        data = {"name": args.scenario or "round", "params": {}}
    if args.n is not None:
        data["n"] = args.n
    if args.J is not None:
        data["J"] = args.J
    if getattr(args, "lam", None) is not None:
        data.setdefault("params", {})["lambda"] = args.lam
    data["seed"] = args.seed
    return ScenarioSpec.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="confsphere", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    def scenario_flags(p):
        p.add_argument("--scenario", choices=SCENARIOS)
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--n", type=int)
        p.add_argument("--lambda", dest="lam", type=float, help="bubble parameter")
        p.add_argument("--J", type=int, help="sequence length")
        p.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify", help="run verification suites")
    scenario_flags(v)
    v.add_argument("--suite", default="all")
    v.add_argument("--samples", type=int, help="scrambled Sobol sample count")
    v.add_argument("--resolution", type=int, help="quadrature resolution")
    v.add_argument("--h", type=float, default=DEFAULT_H)
    v.add_argument("--tol", type=float, default=0.01, help="relative tolerance of identities")
    v.add_argument("--variant", choices=("u", "power", "f"))
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--out", type=Path)

    c = sub.add_parser("constants", help="print dimensional constants")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--out", type=Path)

    d = sub.add_parser("scenario-dump", help="write a scenario and its sampled values")
    scenario_flags(d)
    d.add_argument("--samples", type=int)
    d.add_argument("--resolution", type=int)
    d.add_argument("--out", type=Path)

    p = sub.add_parser("plot", help="render SVG plots from a report bundle")
    p.add_argument("report", type=Path, help="report.json or a bundle directory")
    p.add_argument("--kind", action="append", choices=PLOT_KINDS)
    p.add_argument("--out", type=Path)
    return ap


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "verify":
            run = SuiteRun(args.suite, _scenario_from_args(args), args.seed, args.out, args.h,
                           args.tol, args.samples, args.resolution, args.variant, args.workers)
            status, report, side = run_suite(run)
            if args.out is not None:
                write_bundle(args.out, report, side, ["verify"] + argv[1:])
            s = report["summary"]
            print(f"{s['checks']} checks, {s['failed']} failed, "
                  f"{len(report['skipped'])} skipped -> exit {status}")
            for name in s["failed_checks"]:
                print(f"  FAIL {name}")
            return status
        if args.verb == "constants":
            _emit(dumps(jsonable(constants(args.n).to_dict())), args.out, "constants.json")
            return EXIT_OK
        if args.verb == "scenario-dump":
            spec = _scenario_from_args(args)
            _emit(dumps(spec.to_dict()), args.out, "scenario.json")
            if args.out is not None:
                sampling = (qmc_sphere_sampling(spec.n, args.samples, spec.seed)
                            if args.samples else recommended_sampling(spec, args.resolution))
                seq = spec.sequence()
                cols = [cf.f.evaluate(sampling.points) for cf in seq.factors]
                header = ([f"x{i}" for i in range(spec.n + 1)] + ["weight"]
                          + [f"f{j}" for j in range(len(cols))])
                rows = np.column_stack([sampling.points, sampling.weights] + cols)
                _write_rows(args.out / "values.csv", header, rows.tolist())
            return EXIT_OK
        if args.verb == "plot":
            path = args.report / "report.json" if args.report.is_dir() else args.report
            report = json.loads(path.read_text())
            kinds = args.kind or [k for k in PLOT_KINDS if report.get("series", {}).get(k)]
            if not kinds:
                raise InvalidArgumentError("report contains no plottable series")
            for p in emit_plots(report, kinds, args.out or path.parent):
                print(p)
            return EXIT_OK
    except (UsageError, InvalidArgumentError, DimensionError, RangeError, MissingBoundError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE
