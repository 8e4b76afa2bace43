"""Command-line entry point: floquet4 {spectrum,trace,eigs,resonances,verify,perturb}.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from . import __version__
from . import asymptotics as asym
from .coeffs import PRESETS, CoefficientSet, load_coeffs, preset, random_coeffs
from .discriminants import (CSV_HEADER, bound_violations, bundle_row, bundles,
                            char_poly_residual, identity_residuals, pairing_residual,
                            perturbation_bounds)
from .errors import FloquetError, InputError, PreconditionError
from .monodromy import DEFAULT_RTOL, integrate_batch
from .reference import CLAMP_X
from .spectrum import SCHEMA_VERSION, assemble, validate_report
from .zeros import (count_zeros, disk_lambda, enumerate_and_label, natural_radii,
                    resonance_domain, s_to_lambda)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

IDENTITY_TOL = 1e-8
DET_TOL = 1e-9
PAIRING_TOL = 1e-8
BOUND_SLACK = 1e-9    # rounding allowance, relative to max(1, |T2|)

BOUND_TEXT = {
    "T1": "|T1 - T1_free| <= kappa/(2|z|_1) e^(x+kappa)",
    "T2": "|T2 - T2_free| <= kappa/|z|_1 e^(2x+kappa)",
    "rho": "|rho - rho_free| <= 3 kappa/|z|_1 e^(2x+kappa)",
    "Dplus": "|D+ - D+_free| <= 7 kappa/|z| e^(x+|y|) on Lambda_4",
    "Dminus": "|D- - D-_free| <= 7 kappa/|z| e^(x+|y|) on Lambda_4",
    "T": "|T - T_free| <= 9 kappa/|z| e^(x+|y|) on Lambda_3",
}


@dataclass
class RunConfig:
    command: str
    coeffs: CoefficientSet
    source: str
    n_max: int = 3
    lambda_max: Optional[float] = None
    eps: tuple = (0.05, 0.1, 0.2)
    tol_ode: float = DEFAULT_RTOL
    tol_root: float = 1e-14
    out: Optional[str] = None
    fmt: str = "json"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.tol_ode > 0 and self.tol_root > 0):
            raise InputError("tolerances must be positive")
        if self.n_max < 1:
            raise InputError("--n-max must be at least 1")
        if self.lambda_max is not None and self.lambda_max ** 0.25 > CLAMP_X:
            raise PreconditionError(
                f"--lambda-max {self.lambda_max:.6g} exceeds the overflow clamp "
                f"(lambda^(1/4) > {CLAMP_X})")

    def provenance(self) -> dict:
        return {"command": self.command, "source": self.source, "coeffs": self.coeffs.to_dict(),
                "coeffs_digest": self.coeffs.digest(), "tol_ode": self.tol_ode,
                "tol_root": self.tol_root, "version": __version__}


# ---------------------------------------------------------------------------
# output


def fmt_float(x: float) -> str:
    return f"{x:.17g}"


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """Deterministic JSON with every float written at 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, (bool, type(None), str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows) -> str:
    fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else fmt_float(v) if isinstance(v, float) else v for v in r])
    return fh.getvalue()


def emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def lambda_max_for(cfg: RunConfig) -> float:
    if cfg.lambda_max is not None:
        return cfg.lambda_max
    return (math.pi * (cfg.n_max + 0.5)) ** 4


def cmd_spectrum(cfg: RunConfig) -> int:
    report = assemble(cfg.coeffs, lambda_max_for(cfg), cfg.tol_ode, tol_root=cfg.tol_root)
    d = report.to_dict()
    d["provenance"] = {**d["provenance"], **cfg.provenance()}
    problems = validate_report(json.loads(dumps(d)))
    if problems:
        raise FloquetError("report failed its own validation: " + "; ".join(problems))
    if cfg.fmt == "csv":
        rows = [("band", b["n"], b["closure"][0], b["closure"][1], b["case"]) for b in d["bands"]]
        rows += [("gap", None, a, b, None) for a, b in d["gaps"]]
        rows += [("mult4", None, a, b, None) for a, b in d["mult4"]]
        emit(cfg, csv_text(["kind", "n", "lo", "hi", "case"], rows))
    else:
        emit(cfg, dumps(d) + "\n")
    return EXIT_OK


def trace_grid(s_min: float, s_max: float, samples: int):
    if samples < 0:
        raise InputError("--samples must be non-negative")
    if samples == 0:
        return []
    if samples == 1:
        return [float(s_to_lambda(s_min))]
    return [float(v) for v in s_to_lambda(np.linspace(s_min, s_max, samples))]


def cmd_trace(cfg: RunConfig) -> int:
    lams = trace_grid(cfg.extra.get("s_min", -5.0), cfg.extra.get("s_max", 5.0),
                      cfg.extra.get("samples", 101))
    rows = bundles(cfg.coeffs, lams, rtol=cfg.tol_ode) if lams else []
    if cfg.fmt == "csv":
        emit(cfg, csv_text(CSV_HEADER, [bundle_row(b) for b in rows]))
    else:
        out = [dict(zip(CSV_HEADER, bundle_row(b))) for b in rows]
        emit(cfg, dumps({"schema_version": SCHEMA_VERSION, "rows": out,
                         "provenance": cfg.provenance()}) + "\n")
    return EXIT_OK


ZERO_HEADER = ["label", "which", "lambda_re", "lambda_im", "multiplicity", "uncertainty"]


def _zero_rows(zeros):
    rows = []
    for z in zeros:
        for r in z.table_rows():
            rows.append([r["label"], r["which"], r["lambda_re"], r["lambda_im"],
                         r["multiplicity"], r["uncertainty"]])
    return rows


def _emit_zeros(cfg: RunConfig, zeros, counts):
    rows = _zero_rows(zeros)
    if cfg.fmt == "csv":
        emit(cfg, csv_text(ZERO_HEADER, rows))
    else:
        emit(cfg, dumps({"schema_version": SCHEMA_VERSION,
                         "zeros": [dict(zip(ZERO_HEADER, r)) for r in rows],
                         "contour_counts": counts, "provenance": cfg.provenance()}) + "\n")


def cmd_eigs(cfg: RunConfig) -> int:
    N = max(1, math.ceil(cfg.n_max / 2))
    t = enumerate_and_label(cfg.coeffs, N, cfg.tol_ode, cfg.tol_root, which=("Dplus", "Dminus"))
    _emit_zeros(cfg, sorted(t.periodic + t.antiperiodic, key=lambda z: z.lam.real), t.counts)
    return EXIT_OK


def cmd_resonances(cfg: RunConfig) -> int:
    t = enumerate_and_label(cfg.coeffs, 1, cfg.tol_ode, cfg.tol_root, which=("rho",), N_rho=cfg.n_max)
    _emit_zeros(cfg, t.resonances, t.counts)
    return EXIT_OK


# -- verify -----------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    max_residual: float
    threshold: float
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {"suite": self.name, "passed": self.passed, "max_residual": self.max_residual,
                "threshold": self.threshold, "violations": self.violations[:20],
                "violation_count": len(self.violations)}


_PAIRS = list(combinations(range(4), 2))


def compound_residual(M: np.ndarray, Y: np.ndarray) -> float:
    """Co-integrated second compound versus the 2x2 minors of M, relative."""
    minors = np.array([[np.linalg.det(M[np.ix_(a, b)]) for b in _PAIRS] for a in _PAIRS])
    return float(np.max(np.abs(minors - Y)) / max(1.0, np.max(np.abs(Y))))


def verify_sets(cfg: RunConfig):
    rng = np.random.default_rng(cfg.extra.get("seed", 0))
    sets = [("input", cfg.coeffs)]
    for i in range(cfg.extra.get("random_sets", 3)):
        sets.append((f"random{i}", random_coeffs(rng, kmax=3, amp=1.0)))
    lams = rng.uniform(-1e4, 1e4, cfg.extra.get("lambdas", 20))
    return sets, lams, rng


def run_suites(cfg: RunConfig) -> list:
    sets, lams, rng = verify_sets(cfg)
    ident = SuiteResult("identity", 0.0, IDENTITY_TOL, [])
    det = SuiteResult("det-M", 0.0, DET_TOL, [])
    pair = SuiteResult("pairing", 0.0, PAIRING_TOL, [])
    bound = SuiteResult("bound", 0.0, 0.0, [])
    count = SuiteResult("count", 0.0, 0.0, [])
    for name, c in sets:
        # complex points far out probe the bounds restricted to Lambda_3 / Lambda_4
        cplx = [r * np.exp(1j * th) for r, th in zip(rng.uniform(1e3, 1e5, 5), rng.uniform(0, 2 * np.pi, 5))]
        pts = [complex(v) for v in lams] + cplx
        res = integrate_batch(c, pts, want_compound=True, rtol=cfg.tol_ode)
        for lam, b, r in zip(pts, bundles(c, pts, rtol=cfg.tol_ode), res):
            pb = bound_ratio(c, b)
            bound.max_residual = max(bound.max_residual, pb)
            for key in bound_violations(c, b, BOUND_SLACK):
                bound.violations.append(f"{name} lambda={lam}: {BOUND_TEXT[key]}")
            ir = identity_residuals(b)
            worst = max(v for k, v in ir.items() if k != "detM=1")
            worst = max(worst, char_poly_residual(b) / b.scale)
            ident.max_residual = max(ident.max_residual, worst)
            if worst > IDENTITY_TOL:
                ident.violations.append(f"{name} lambda={lam}: identity residual {worst:.3g}")
            pr = pairing_residual(b)
            pair.max_residual = max(pair.max_residual, pr)
            if pr > PAIRING_TOL:
                pair.violations.append(f"{name} lambda={lam}: multipliers (tau, 1/tau) residual {pr:.3g}")
            if lam.imag != 0:
                continue  # far complex points probe the bounds; det M is checked on the real sample
            d = max(ir["detM=1"], compound_residual(r.M, r.compound))
            det.max_residual = max(det.max_residual, d)
            if d > DET_TOL:
                det.violations.append(f"{name} lambda={lam}: det M = 1 / compound residual {d:.3g}")
        count_suite(c, name, cfg.tol_ode, count)
    return [ident, det, pair, bound, count]


def bound_ratio(c: CoefficientSet, b) -> float:
    """Largest deviation/bound ratio among applicable bounds (0 when κ = 0)."""
    worst = 0.0
    for dev, bnd, applies in perturbation_bounds(c, b).values():
        if applies and bnd > 0:
            worst = max(worst, dev / bnd)
    return worst


def _safe_count(which, contour, c, rtol, out: SuiteResult, name: str):
    try:
        return count_zeros(which, contour, c, rtol)
    except FloquetError as exc:
        out.violations.append(f"{name}: {which} count failed: {exc}")
        return None


def count_suite(c: CoefficientSet, name: str, rtol: float, out: SuiteResult):
    """Zero counts on disks and lemon domains lying where the free comparison holds."""
    floor = 4 * max(1.0, c.kappa)
    free = {"Dplus": lambda N: 2 * N + 1, "Dminus": lambda N: 2 * N, "rho": lambda N: 2 * N + 1}
    for which in ("Dplus", "Dminus", "rho"):
        for N in (1, 2, 3):
            R = natural_radii(which, N)[-1]
            if R <= floor or R > CLAMP_X:
                continue
            got = _safe_count(which, disk_lambda(0, R ** 4), c, rtol, out, name)
            if got is not None and got != free[which](N):
                out.violations.append(f"{name}: {which} has {got} zeros in |lambda|^(1/4) < {R:.4g}, "
                                      f"expected {free[which](N)}")
    for n in (1, 2, 3, 4):
        inner = math.sqrt(2) * math.pi * n - math.pi / (2 * math.sqrt(2))
        if inner <= floor:
            continue
        got = _safe_count("rho", resonance_domain(n), c, rtol, out, name)
        if got is not None and got != 2:
            out.violations.append(f"{name}: rho has {got} zeros near -4(pi {n})^4, expected 2")


def cmd_verify(cfg: RunConfig) -> int:
    suites = run_suites(cfg)
    ok = all(s.passed for s in suites)
    if cfg.fmt == "csv":
        emit(cfg, csv_text(["suite", "passed", "max_residual", "threshold", "violation_count"],
                           [[s.name, s.passed, float(s.max_residual), float(s.threshold),
                             len(s.violations)] for s in suites]))
    else:
        emit(cfg, dumps({"schema_version": SCHEMA_VERSION, "passed": ok,
                         "suites": [s.to_dict() for s in suites],
                         "provenance": cfg.provenance()}) + "\n")
    for s in suites:
        print(f"{s.name}: {'PASS' if s.passed else 'FAIL'} max residual {s.max_residual:.3e}",
              file=sys.stderr)
        for v in s.violations[:5]:
            print(f"  violated: {v}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


# -- perturb ----------------------------------------------------------------

PERTURB_HEADER = ["eps", "r0_minus", "lambda0_plus", "gap", "T1_at_lambda0",
                  "r0_pred", "l0_pred", "gap_pred", "T1_pred", "error"]


def perturb_rows(cfg: RunConfig):
    rows, slopes = asym.perturbation_sweep(cfg.coeffs, cfg.eps, cfg.tol_ode)
    table = []
    for b, p in rows:
        pred = [None] * 4 if p is None else [p.r0_pred, p.l0_pred, p.gap_pred, p.T1_pred]
        table.append([b.eps, b.r0_minus, b.lambda0_plus, b.gap, b.T1_at_lambda0] + pred + [b.error])
    return table, slopes, asym.measured_prefactors(cfg.coeffs, rows)


def cmd_perturb(cfg: RunConfig) -> int:
    table, slopes, pref = perturb_rows(cfg)
    if cfg.fmt == "csv":
        emit(cfg, csv_text(PERTURB_HEADER, table))
    else:
        emit(cfg, dumps({"schema_version": SCHEMA_VERSION,
                         "rows": [dict(zip(PERTURB_HEADER, r)) for r in table],
                         "slopes": slopes, "prefactors": pref,
                         "provenance": cfg.provenance()}) + "\n")
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "trace": cmd_trace, "eigs": cmd_eigs,
            "resonances": cmd_resonances, "verify": cmd_verify, "perturb": cmd_perturb}


# ---------------------------------------------------------------------------
# argument parsing


def _eps_list(text: str):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty eps list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--coeffs", help="JSON file with p/q Fourier coefficients")
    src.add_argument("--preset", choices=PRESETS, help="named coefficient set (default: zero)")
    common.add_argument("--scale", type=float, default=1.0, help="multiply p and q by this factor")
    common.add_argument("--n-max", type=int, default=3, help="highest band/zero index of interest")
    common.add_argument("--lambda-max", type=float, help="upper end of the real-axis scan")
    common.add_argument("--eps", type=_eps_list, default=(0.05, 0.1, 0.2),
                        help="comma-separated list for the perturb sweep")
    common.add_argument("--tol-ode", type=float, default=DEFAULT_RTOL, help="integrator rtol")
    common.add_argument("--tol-root", type=float, default=1e-14, help="relative root tolerance")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)

    p = argparse.ArgumentParser(prog="floquet4", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="labeled bands, gaps and multiplicity-4 set")
    t = sub.add_parser("trace", parents=[common], help="discriminant samples on an s-grid")
    t.add_argument("--s-min", type=float, default=-5.0, help="grid start in s = sign(lambda)|lambda|^(1/4)")
    t.add_argument("--s-max", type=float, default=5.0)
    t.add_argument("--samples", type=int, default=101)
    sub.add_parser("eigs", parents=[common], help="periodic and antiperiodic eigenvalues")
    sub.add_parser("resonances", parents=[common], help="zeros of rho")
    v = sub.add_parser("verify", parents=[common], help="identity, det-M, pairing, bound and count suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--random-sets", type=int, default=3)
    v.add_argument("--lambdas", type=int, default=20)
    sub.add_parser("perturb", parents=[common], help="bottom-of-spectrum sweep over eps")
    return p


def config_from_args(args) -> RunConfig:
    if args.coeffs:
        c, source = load_coeffs(args.coeffs), args.coeffs
    else:
        name = args.preset or "zero"
        c, source = preset(name), f"preset:{name}"
    if not math.isfinite(args.scale):
        raise InputError("--scale must be finite")
    if args.scale != 1.0:
        c = c.scaled(args.scale)
        source += f"*{args.scale!r}"
    extra = {k: getattr(args, k) for k in ("s_min", "s_max", "samples", "seed", "random_sets", "lambdas")
             if hasattr(args, k)}
    fmt = args.fmt or ("csv" if args.command == "trace" else "json")
    return RunConfig(args.command, c, source, args.n_max, args.lambda_max, args.eps,
                     args.tol_ode, args.tol_root, args.out, fmt, extra)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except FloquetError as exc:
        print(f"floquet4 {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"floquet4 {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
