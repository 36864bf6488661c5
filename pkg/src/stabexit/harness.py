"""Command-line front end: verification sweeps, Monte Carlo runs, reports.

Every subcommand produces an :class:`ExperimentReport` written as JSON or
CSV.  Exit codes: 0 when every row passes, 1 on a failed row, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import as_alpha, kappa, mean_exit_closed_form, profile
from .errors import ConfigError, DomainError, QuadratureError
from .pvquad import (
    PVQuadSpec,
    apply_K,
    apply_K_nu,
    apply_K_nu_quadrature,
    apply_K_quadrature,
    apply_Kv,
    getoor_identity_check,
)
from .simulate import (
    CompoundPoissonGaussian,
    ExactIncrement,
    ExitTimeConfig,
    ExitTimeEstimate,
    config_from_dict,
    estimate_mean_exit,
)
from .spectral import SpectralMeasure, antipodal_pair, axis_cross, total_mass

log = logging.getLogger("stabexit")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

ALPHA_GRID = (0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 1.8)
U_FRACTIONS = (0.0, 0.3, -0.3, 0.6, -0.6, 0.9, -0.9)
QUAD_TOL = 1e-6
GENERATOR_REL_TOL = 1e-5
#: Relative discretisation-bias allowance for Monte Carlo rows.
BIAS_BUDGET = 0.01

ESTIMATE_CSV_COLUMNS = ("x0_norm", "alpha", "mu_total", "expected", "observed", "stderr", "n_truncated", "pass")


@dataclass
class Row:
    label: str
    expected: float
    observed: float
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"label": self.label, "expected": self.expected, "observed": self.observed,
             "tolerance": self.tolerance, "pass": self.passed}
        d.update(self.extra)
        return d


def quad_row(label, expected, observed, tolerance, **extra) -> Row:
    return Row(label, float(expected), float(observed), float(tolerance),
               bool(abs(expected - observed) <= tolerance), extra)


def mc_row(label, expected, estimate: ExitTimeEstimate, bias_budget=BIAS_BUDGET, **extra) -> Row:
    tol = 3.0 * estimate.stderr + bias_budget * abs(expected)
    extra.update(stderr=estimate.stderr, n_truncated=estimate.n_truncated, unreliable=estimate.unreliable)
    return Row(label, float(expected), float(estimate.mean), float(tol),
               bool(abs(expected - estimate.mean) <= tol), extra)


@dataclass
class ExperimentReport:
    command: str
    inputs: dict
    rows: list[Row] = field(default_factory=list)
    wall_time: float | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self, include_timing: bool = False) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "rows": [r.to_dict() for r in self.rows],
            "wall_time": self.wall_time if include_timing else None,
            "pass": self.passed,
        }

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.command == "estimate":
            columns = ESTIMATE_CSV_COLUMNS
        else:
            columns = ("label", "expected", "observed", "tolerance", "pass")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in self.rows:
            d = row.to_dict()
            writer.writerow([_csv_cell(d.get(c)) for c in columns])
        return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def report_from_json(text: str) -> ExperimentReport:
    doc = json.loads(text)
    rows = []
    for d in doc["rows"]:
        d = dict(d)
        rows.append(Row(d.pop("label"), d.pop("expected"), d.pop("observed"), d.pop("tolerance"), d.pop("pass"), d))
    return ExperimentReport(doc["command"], doc["inputs"], rows, doc.get("wall_time"))


# ---------------------------------------------------------------- commands


def cmd_verify_getoor(alpha_grid=ALPHA_GRID, u_grid=None, r_values=(0.5, 1.0, 2.0),
                      spec: PVQuadSpec | None = None, tolerance=QUAD_TOL) -> ExperimentReport:
    """Sweep the 1-D identity over alpha, u and r.  ``u_grid`` holds absolute
    positions; by default it is {0, +-0.3, +-0.6, +-0.9} * r for each r."""
    rep = ExperimentReport("verify-getoor", {
        "alpha_grid": list(alpha_grid), "u_grid": None if u_grid is None else list(u_grid),
        "r_values": list(r_values), "tolerance": tolerance,
    })
    for r in r_values:
        us = [f * r for f in U_FRACTIONS] if u_grid is None else list(u_grid)
        bad = [u for u in us if not abs(u) < r]
        if bad:
            raise ConfigError(f"u values {bad} lie outside (-r, r) for r={r}")
        for a, u in itertools.product(alpha_grid, us):
            res = getoor_identity_check(u, r, a, spec)
            rep.rows.append(quad_row(f"alpha={a:g} r={r:g} u={u:g}", -1.0, res.value, tolerance,
                                     error_estimate=res.error_estimate))
    return rep


def _random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    q, rr = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(rr))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def cmd_verify_lemma(dims=(1, 2, 3, 5), cases=50, seed=None, r=1.0, alpha_grid=ALPHA_GRID,
                     spec: PVQuadSpec | None = None, tolerance=2e-6) -> ExperimentReport:
    """Random (v, x) pairs with |x| < r: K_v S_r(x) against -|v|^alpha.

    Each dimension also gets the fixed cases v = e_1, x = 0; a doubled v;
    and a rotated copy of a random pair.
    """
    if seed is None:
        raise ConfigError("verify-lemma is randomized and needs an explicit --seed")
    rng = np.random.default_rng(seed)
    rep = ExperimentReport("verify-lemma", {"dims": list(dims), "cases": cases, "seed": seed, "r": r,
                                            "alpha_grid": list(alpha_grid), "tolerance": tolerance})

    def add(label, v, x, a):
        res = apply_Kv(v, x, r, a, spec)
        expected = -float(np.linalg.norm(v)) ** a
        rep.rows.append(quad_row(label, expected, res.value, tolerance, error_estimate=res.error_estimate))

    for d in dims:
        e1 = np.eye(d)[0]
        for a in (0.5, 1.0, 1.5):
            add(f"d={d} alpha={a:g} v=e1 x=0", e1, np.zeros(d), a)
            add(f"d={d} alpha={a:g} v=2e1 x=0", 2.0 * e1, np.zeros(d), a)
        for i in range(cases):
            a = float(rng.choice(alpha_grid))
            v = rng.standard_normal(d) * rng.uniform(0.2, 3.0)
            direction = rng.standard_normal(d)
            x = direction / np.linalg.norm(direction) * r * rng.uniform(0.0, 0.95) ** (1.0 / d)
            add(f"d={d} case={i} alpha={a:g}", v, x, a)
            if i == 0 and d > 1:
                R = _random_rotation(d, rng)
                add(f"d={d} case={i} rotated alpha={a:g}", R @ v, R @ x, a)
    return rep


def _generator_measures(d: int, rng: np.random.Generator) -> list[tuple[str, SpectralMeasure]]:
    raw = rng.standard_normal((3, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return [
        ("antipodal", antipodal_pair(d, 2.0)),
        ("axis-cross", axis_cross(d, 4.0)),
        ("random-atoms", SpectralMeasure.discrete(raw, rng.uniform(0.5, 2.0, 3))),
    ]


def cmd_verify_generator(dims=(1, 2, 3), alphas=(0.5, 1.0, 1.5), seed=None, r=1.0,
                         spec: PVQuadSpec | None = None, rel_tol=GENERATOR_REL_TOL) -> ExperimentReport:
    """apply_K (identity, 2 * identity, a random rotation) and apply_K_nu,
    each compared with its atom-by-atom quadrature."""
    if seed is None:
        raise ConfigError("verify-generator is randomized and needs an explicit --seed")
    rng = np.random.default_rng(seed)
    rep = ExperimentReport("verify-generator", {"dims": list(dims), "alphas": list(alphas), "seed": seed,
                                                "r": r, "rel_tol": rel_tol})
    for d in dims:
        measures = _generator_measures(d, rng)
        measures.append(("isotropic", SpectralMeasure.isotropic(d, 2.0 * math.pi)))
        for (name, mu), a in itertools.product(measures, alphas):
            m = total_mass(mu)
            x = rng.standard_normal(d)
            x *= 0.7 * r * rng.uniform() / np.linalg.norm(x)
            tol = rel_tol * m
            knu = apply_K_nu(mu, x, r, a)
            rep.rows.append(quad_row(f"d={d} {name} alpha={a:g} K_nu closed", -0.5 * m, knu, 0.0))
            q = apply_K_nu_quadrature(mu, x, r, a, spec)
            rep.rows.append(quad_row(f"d={d} {name} alpha={a:g} K_nu quad", knu, q.value, tol))
            if not mu.is_discrete:
                continue
            maps = [("identity", np.eye(d)), ("2*identity", 2.0 * np.eye(d)),
                    ("rotation", _random_rotation(d, rng))]
            for map_name, A in maps:
                k = apply_K(mu, A, x, r, a)
                expected = -m * (2.0 ** a if map_name == "2*identity" else 1.0)
                exact = map_name == "identity"
                rep.rows.append(quad_row(f"d={d} {name} alpha={a:g} K[{map_name}] closed", expected, k,
                                         0.0 if exact else 1e-12 * m))
                q = apply_K_quadrature(mu, A, x, r, a, spec)
                rep.rows.append(quad_row(f"d={d} {name} alpha={a:g} K[{map_name}] quad", k, q.value, tol))
    return rep


def cmd_closed_form(alphas=ALPHA_GRID, r=1.0, x_norms=(0.0, 0.25, 0.5, 0.75), mu_total=4.0,
                    d=2) -> ExperimentReport:
    """Table of closed-form mean exit times.  Each value is checked against
    2 S_r(x) / |mu|, which reaches the same number through c_alpha."""
    rep = ExperimentReport("closed-form", {"alphas": list(alphas), "r": r, "x_norms": list(x_norms),
                                           "mu_total": mu_total, "d": d})
    for a, s in itertools.product(alphas, x_norms):
        x = np.zeros(d)
        x[0] = s
        value = mean_exit_closed_form(x, r, a, mu_total)
        other = 2.0 * profile(x, r, a) / mu_total
        rep.rows.append(quad_row(f"alpha={a:g} |x|={s:g}", other, value, 1e-12 * max(abs(other), 1e-300),
                                 kappa=kappa(a)))
    return rep


def _run_estimate(config: ExitTimeConfig, threads: int) -> ExitTimeEstimate:
    est = estimate_mean_exit(config, threads=threads)
    if est.unreliable:
        log.warning("%.3g%% of paths truncated; estimate flagged unreliable", 100 * est.truncated_fraction)
    return est


def cmd_estimate(config_doc: dict, threads: int = 1, seed: int | None = None,
                 bias_budget: float = BIAS_BUDGET) -> ExperimentReport:
    """Monte Carlo mean exit time against the closed form, one row per starting point.

    ``config_doc["x0"]`` is a point or a list of points.  ``seed``
    overrides the document's seed.
    """
    doc = dict(config_doc)
    if seed is not None:
        doc["seed"] = seed
    if "seed" not in doc:
        raise ConfigError("estimate needs a seed (config field or --seed)")
    x0s = doc.get("x0")
    if x0s is None:
        raise ConfigError("config is missing x0")
    if not (isinstance(x0s, list) and x0s and isinstance(x0s[0], list)):
        x0s = [x0s]
    rep = ExperimentReport("estimate", {"config": doc, "bias_budget": bias_budget})
    for x0 in x0s:
        cfg = config_from_dict(doc, x0=x0)
        est = _run_estimate(cfg, threads)
        expected = cfg.closed_form()
        rep.rows.append(mc_row(
            f"x0={list(map(float, x0))}", expected, est, bias_budget,
            x0_norm=float(np.linalg.norm(cfg.x0)), alpha=cfg.alpha, mu_total=total_mass(cfg.mu),
            config_hash=est.config_hash, shifts=list(est.shifts),
        ))
    return rep


def _measure_family(d: int, masses) -> list[tuple[str, SpectralMeasure]]:
    return [
        ("antipodal", antipodal_pair(d, masses[0])),
        ("axis-cross", axis_cross(d, masses[1])),
        ("isotropic", SpectralMeasure.isotropic(d, masses[2])),
    ]


def cmd_mass_equivalence(mass=4.0, alpha=1.0, d=2, r=1.0, n_paths=20000, seed=None, masses=None,
                         step_fraction=1e-3, sampler="exact", threads=1,
                         bias_budget=BIAS_BUDGET) -> ExperimentReport:
    """Three spectral measures (antipodal pair, axis cross, isotropic) with the
    same total mass; pairwise estimate differences must lie within three
    combined standard errors.  ``masses`` sets the three totals separately,
    which serves as a negative control."""
    if seed is None:
        raise ConfigError("mass-equivalence is randomized and needs an explicit --seed")
    masses = [mass] * 3 if masses is None else [float(m) for m in masses]
    if len(masses) != 3:
        raise ConfigError("need exactly three masses")
    as_alpha(alpha)
    rep = ExperimentReport("mass-equivalence", {
        "masses": masses, "alpha": alpha, "d": d, "r": r, "n_paths": n_paths, "seed": seed,
        "step_fraction": step_fraction, "sampler": sampler, "bias_budget": bias_budget,
        "closed_forms_equal": len(set(masses)) == 1,
    })
    x0 = np.zeros(d)
    estimates = []
    for i, (name, mu) in enumerate(_measure_family(d, masses)):
        expected = mean_exit_closed_form(x0, r, alpha, total_mass(mu))
        smp = ExactIncrement() if sampler == "exact" else CompoundPoissonGaussian(r / 50.0)
        cfg = ExitTimeConfig(x0=x0, r=r, alpha=alpha, mu=mu, sampler=smp, h=step_fraction * expected,
                             n_paths=n_paths, seed=(seed + i) % 2**64)
        est = _run_estimate(cfg, threads)
        estimates.append((name, est))
        rep.rows.append(mc_row(f"{name} vs closed form", expected, est, bias_budget))
    for (n1, e1), (n2, e2) in itertools.combinations(estimates, 2):
        combined = math.hypot(e1.stderr, e2.stderr)
        rep.rows.append(quad_row(f"{n1} - {n2}", 0.0, e1.mean - e2.mean, 3.0 * combined))
    return rep


def cmd_scaling_check(alpha=1.0, d=2, x0=(0.3, 0.0), r=1.0, lam=2.0, mass=4.0, n_paths=20000, seed=None,
                      step_fraction=1e-3, threads=1) -> ExperimentReport:
    """Estimates at (x0, r) and (lam x0, lam r); their ratio should be lam^alpha.
    The step is a fixed fraction of each closed-form mean."""
    if seed is None:
        raise ConfigError("scaling-check is randomized and needs an explicit --seed")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise ConfigError(f"x0 must have dimension {d}")
    mu = axis_cross(d, mass)
    rep = ExperimentReport("scaling-check", {"alpha": alpha, "d": d, "x0": x0.tolist(), "r": r, "lambda": lam,
                                             "mass": mass, "n_paths": n_paths, "seed": seed,
                                             "step_fraction": step_fraction})
    ests = []
    for i, scale in enumerate((1.0, lam)):
        expected = mean_exit_closed_form(scale * x0, scale * r, alpha, mass)
        cfg = ExitTimeConfig(x0=scale * x0, r=scale * r, alpha=alpha, mu=mu, sampler=ExactIncrement(),
                             h=step_fraction * expected, n_paths=n_paths, seed=(seed + i) % 2**64)
        est = _run_estimate(cfg, threads)
        ests.append(est)
        rep.rows.append(mc_row(f"scale={scale:g} vs closed form", expected, est))
    e1, e2 = ests
    ratio = e2.mean / e1.mean
    rel_ci = math.hypot(e1.stderr / e1.mean, e2.stderr / e2.mean)
    rep.rows.append(quad_row("ratio lambda^alpha", lam ** alpha, ratio, 3.0 * rel_ci * ratio))
    return rep


# ---------------------------------------------------------------- CLI


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--timing", action="store_true", help="embed wall time in the JSON report")
    common.add_argument("--seed", type=_seed)
    common.add_argument("--config", type=Path)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="stabexit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify-getoor", parents=[common], help="1-D PV identity sweep")
    s.add_argument("--alpha", type=_floats, default=list(ALPHA_GRID))
    s.add_argument("--u", type=_floats, default=None, help="absolute u values (default: fractions of r)")
    s.add_argument("--r", type=_floats, default=[0.5, 1.0, 2.0])

    s = sub.add_parser("verify-lemma", parents=[common], help="directional operator on random (v, x)")
    s.add_argument("--dims", type=_ints, default=[1, 2, 3, 5])
    s.add_argument("--cases", type=int, default=50)
    s.add_argument("--r", type=float, default=1.0)

    s = sub.add_parser("verify-generator", parents=[common], help="apply_K / apply_K_nu with quadrature")
    s.add_argument("--dims", type=_ints, default=[1, 2, 3])
    s.add_argument("--alpha", type=_floats, default=[0.5, 1.0, 1.5])

    s = sub.add_parser("closed-form", parents=[common], help="table of closed-form mean exit times")
    s.add_argument("--alpha", type=_floats, default=list(ALPHA_GRID))
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--x-norms", type=_floats, default=[0.0, 0.25, 0.5, 0.75])
    s.add_argument("--mass", type=float, default=4.0)
    s.add_argument("--d", type=int, default=2)

    sub.add_parser("estimate", parents=[common], help="Monte Carlo run from a JSON config")

    s = sub.add_parser("mass-equivalence", parents=[common], help="three measures with equal total mass")
    s.add_argument("--mass", type=float, default=4.0)
    s.add_argument("--masses", type=_floats, default=None, help="three comma-separated totals (negative control)")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--n-paths", type=int, default=20000)
    s.add_argument("--step-fraction", type=float, default=1e-3)
    s.add_argument("--sampler", choices=("exact", "cpg"), default="exact")

    s = sub.add_parser("scaling-check", parents=[common], help="(x0, r) versus (lam x0, lam r)")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--x0", type=_floats, default=None)
    s.add_argument("--r", type=float, default=1.0)
    s.add_argument("--lam", type=float, default=2.0)
    s.add_argument("--mass", type=float, default=4.0)
    s.add_argument("--n-paths", type=int, default=20000)
    s.add_argument("--step-fraction", type=float, default=1e-3)
    return p


def _dispatch(args) -> ExperimentReport:
    c = args.command
    if c == "verify-getoor":
        return cmd_verify_getoor(args.alpha, args.u, args.r)
    if c == "verify-lemma":
        return cmd_verify_lemma(args.dims, args.cases, args.seed, args.r)
    if c == "verify-generator":
        return cmd_verify_generator(args.dims, args.alpha, args.seed)
    if c == "closed-form":
        return cmd_closed_form(args.alpha, args.r, args.x_norms, args.mass, args.d)
    if c == "estimate":
        if args.config is None:
            raise ConfigError("estimate needs --config")
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        return cmd_estimate(doc, threads=args.threads, seed=args.seed)
    if c == "mass-equivalence":
        return cmd_mass_equivalence(args.mass, args.alpha, args.d, args.r, args.n_paths, args.seed,
                                    masses=args.masses, step_fraction=args.step_fraction,
                                    sampler=args.sampler, threads=args.threads)
    if c == "scaling-check":
        x0 = args.x0 if args.x0 is not None else [0.3] + [0.0] * (args.d - 1)
        return cmd_scaling_check(args.alpha, args.d, x0, args.r, args.lam, args.mass, args.n_paths,
                                 args.seed, step_fraction=args.step_fraction, threads=args.threads)
    raise ConfigError(f"unknown command {c!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        report = _dispatch(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"quadrature failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report.wall_time = time.perf_counter() - t0
    text = report.to_json(args.timing) if args.format == "json" else report.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    n_fail = sum(not r.passed for r in report.rows)
    print(f"{args.command}: {len(report.rows) - n_fail}/{len(report.rows)} rows pass, "
          f"{report.wall_time:.1f}s", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
