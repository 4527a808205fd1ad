"""Command-line entry point: period reports, Thomae verification, exponent tables,
Szego and variation runs.

Exit codes: 0 all checks pass, 1 a check failed, 2 invalid input, 3 numerical failure.
All reports are JSON with sorted keys; ``--csv`` writes a flat mirror.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .abel import abel_data, e_lambda, find_odd_half_char
from .curve import ZNCurve
from .errors import CurveValidationError, DomainError, PartitionError, ZNError
from .homology import build_basis
from .kernels import compare_szego, fay_check, make_context, sample_pairs
from .partitions import OrderedPartition, exponent_summary, frac_str, q_table, standard_sample, thomae_exponents, \
    weighted_sum_check
from .periods import compute_periods
from .theta import theta_tolerance
from .thomae import (build_report, check_derivative_vanishing, check_exchange_ratio, check_lambda_derivative,
                     check_variation, control_characteristic, hyperelliptic_constant, vanishing_ratio)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
CHECKS = ("thomae", "vanishing", "exchange", "szego", "fay", "variation", "lambda-derivative", "hyperelliptic")
MIN_IMPROVEMENT = 2.5       # accepted error ratio between h and h/2 for second-order checks
ROUNDOFF_FLOOR = 1e-9       # below this the h/2 error is roundoff and the order test is skipped

DEFAULT_TOLS = {
    "theta": 1e-15,
    "quad": 1e-14,
    "char": 1e-6,
    "symmetry": 1e-8,
    "spread": 1e-6,
    "residual": 1e-6,
    "vanish": 1e-5,
    "control": 1e-2,
    "szego": 1e-6,
    "modulus": 1e-8,
    "fay": 1e-4,
    "variation": 1e-4,
    "exchange": 1e-5,
    "lambda": 1e-4,
    "hyperelliptic": 1e-5,
}


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    N: list
    m: int | None = None
    lambdas: list | None = None
    lambda_source: str = "seeded"
    seed: int = 0
    annulus: tuple = (1.0, 2.0)
    min_separation: float = 0.15
    partitions: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLS))
    precision: str = "double"
    report: str | None = None
    csv: str | None = None
    checks: tuple = CHECKS
    parallel: int = 1
    control: bool = False
    pairs: int = 20
    branch_points: tuple = (1, 2)
    step: float | None = None

    def validate(self) -> None:
        for k, v in self.tolerances.items():
            if not (isinstance(v, float) and v > 0 and math.isfinite(v)):
                raise InputError(f"tolerance {k} must be positive, got {v!r}")
        if self.precision != "double":
            if self.precision.startswith("extended:"):
                raise InputError("extended precision is not available in this build; use --precision double")
            raise InputError(f"unknown precision mode {self.precision!r}")
        if any(n < 2 for n in self.N):
            raise InputError("N must be at least 2")
        if self.command != "tables":
            if len(self.N) != 1:
                raise InputError(f"{self.command} takes a single N")
            if self.lambdas is None and (self.m is None or self.m < 1):
                raise InputError("give --m (with --seed) or --lambdas")
        if self.parallel < 1:
            raise InputError("--parallel must be >= 1")
        if self.pairs < 1:
            raise InputError("--pairs must be >= 1")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise InputError(f"unknown checks: {', '.join(sorted(bad))}")
        if self.step is not None and not self.step > 0:
            raise InputError("--step must be positive")

    def provenance(self) -> dict:
        doc = asdict(self)
        doc["lambdas"] = None if self.lambdas is None else [[complex(z).real, complex(z).imag] for z in self.lambdas]
        doc["partitions"] = [str(p) for p in self.partitions]
        doc["checks"] = list(self.checks)
        doc["annulus"] = list(self.annulus)
        doc["branch_points"] = list(self.branch_points)
        for k in ("report", "csv", "parallel"):
            doc.pop(k)
        return {"config": doc, "version": __version__, "package": "znthomae"}


# curve input ------------------------------------------------------------------------------

def seeded_lambdas(N: int, m: int, seed: int, annulus=(1.0, 2.0), min_sep: float = 0.15,
                   max_tries: int = 100000) -> list:
    """Nm points uniform (by area) in r_in <= |z| <= r_out, drawn one at a time with rejection."""
    rng = np.random.default_rng(seed)
    r_in, r_out = annulus
    if not 0 < r_in < r_out:
        raise InputError("annulus radii must satisfy 0 < r_in < r_out")
    pts: list = []
    tries = 0
    while len(pts) < N * m:
        tries += 1
        if tries > max_tries:
            raise InputError(f"cannot place {N * m} points with separation {min_sep} in the annulus")
        r = math.sqrt(rng.uniform(r_in ** 2, r_out ** 2))
        t = rng.uniform(0.0, 2 * math.pi)
        z = complex(r * math.cos(t), r * math.sin(t))
        if all(abs(z - w) > min_sep for w in pts):
            pts.append(z)
    return pts


def load_lambdas(path: str) -> tuple[list, int | None]:
    """Branch points from JSON ([[re, im], ...] or {"N": .., "lambdas": ..}) or text, one complex per line."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        vals = []
        for line in text.splitlines():
            line = line.split("#")[0].strip()
            if not line:
                continue
            toks = line.replace(",", " ").split()
            try:
                vals.append(complex(float(toks[0]), float(toks[1])) if len(toks) == 2 else complex(toks[0]))
            except ValueError as exc:
                raise InputError(f"cannot read branch point from {line!r}") from exc
        return vals, None
    if isinstance(doc, dict):
        c = ZNCurve.from_dict(doc)
        return list(c.lambdas), c.N
    if not isinstance(doc, list):
        raise InputError("branch point file must hold a list or a curve document")
    vals = []
    for i, x in enumerate(doc):
        try:
            if isinstance(x, str):
                vals.append(complex(x.replace(" ", "")))
            elif isinstance(x, (int, float)):
                vals.append(complex(x))
            else:
                re, im = x
                vals.append(complex(float(re), float(im)))
        except (TypeError, ValueError) as exc:
            raise InputError(f"branch point {i + 1} is not a complex number or [re, im] pair") from exc
    return vals, None


def make_curve(cfg: RunConfig) -> ZNCurve:
    N = cfg.N[0]
    if cfg.lambdas is None:
        cfg.lambdas = seeded_lambdas(N, cfg.m, cfg.seed, cfg.annulus, cfg.min_separation)
    curve = ZNCurve(N, tuple(cfg.lambdas))
    if cfg.m is not None and curve.m != cfg.m:
        raise InputError(f"--m {cfg.m} does not match {len(cfg.lambdas)} branch points for N={N}")
    cfg.m = curve.m
    for p in cfg.partitions:
        if p.N != N or p.m != curve.m:
            raise PartitionError(f"partition {p} does not fit N={N}, m={curve.m}")
    return curve


def _setup(cfg: RunConfig, need_abel: bool = True):
    curve = make_curve(cfg)
    basis = build_basis(curve)
    P = compute_periods(curve, basis, rtol=cfg.tolerances["quad"])
    ad = abel_data(curve, P) if need_abel else None
    return curve, basis, P, ad


def _partitions(cfg: RunConfig, curve: ZNCurve) -> list:
    return list(cfg.partitions) or standard_sample(curve.N, curve.m, seed=cfg.seed)


def _order_ok(err: float, err_half: float) -> bool:
    return err_half < ROUNDOFF_FLOOR or err / err_half >= MIN_IMPROVEMENT


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# commands -----------------------------------------------------------------------------------

def cmd_periods(cfg: RunConfig) -> tuple[dict, int, str]:
    curve, basis, P, _ = _setup(cfg, need_abel=False)
    sym = P.symmetry_defect()
    eig = P.re_tau_eigenvalues()
    checks = {
        "tau_symmetry": {"value": sym, "tol": cfg.tolerances["symmetry"], "passed": sym <= cfg.tolerances["symmetry"]},
        "re_tau_negative_definite": {"max_eigenvalue": float(eig.max()), "passed": bool(eig.max() < 0)},
    }
    doc = {"curve": curve.to_dict(), "genus": P.g, "periods": P.to_dict(), "basis": basis.to_dict(),
           "checks": checks, "passed": all(c["passed"] for c in checks.values())}
    rows = [["row", "col", "tau_re", "tau_im", "A_re", "A_im"]]
    for i in range(P.g):
        for j in range(P.g):
            rows.append([i + 1, j + 1, repr(P.tau[i, j].real), repr(P.tau[i, j].imag),
                         repr(P.A[i, j].real), repr(P.A[i, j].imag)])
    return doc, EXIT_OK if doc["passed"] else EXIT_FAIL, _rows_csv(rows)


def _szego_checks(cfg: RunConfig, curve, P, ad, parts) -> dict:
    ctx = make_context(curve, P, ad, find_odd_half_char(P.tau))
    pairs = sample_pairs(ctx, cfg.pairs, cfg.seed)
    out = {"odd_characteristic": {"delta": list(ctx.alpha.delta), "eps": list(ctx.alpha.eps)}, "pairs": len(pairs)}
    res = []
    for part in parts[:2]:
        L = e_lambda(curve, P, ad, part, tol_char=cfg.tolerances["char"])
        r = compare_szego(ctx, pairs, part, L.char)
        res.append({k: r[k] for k in ("phase", "phase_is_sign", "max_deviation", "max_modulus_deviation")}
                   | {"partition": str(part)})
    dev = max(r["max_deviation"] for r in res)
    mod = max(r["max_modulus_deviation"] for r in res)
    out["szego"] = {"partitions": res, "max_deviation": dev, "max_modulus_deviation": mod,
                    "passed": dev <= cfg.tolerances["szego"] and mod <= cfg.tolerances["modulus"]}
    L = e_lambda(curve, P, ad, parts[0], tol_char=cfg.tolerances["char"])
    fay = []
    for x, y in pairs[:3]:
        f = fay_check(ctx, x, y, L.char)
        r1, r2 = f["order_residuals"]
        f["passed"] = f["residual"] <= cfg.tolerances["fay"] and _order_ok(r1, r2)
        fay.append(f)
    out["fay"] = {"samples": fay, "max_residual": max(f["residual"] for f in fay),
                  "passed": all(f["passed"] for f in fay)}
    return out


def _variation_checks(cfg: RunConfig, curve, basis, P, ad, part, which=("variation", "lambda-derivative")) -> dict:
    out = {}
    idx = [b - 1 for b in cfg.branch_points]
    for b in idx:
        if not 0 <= b < curve.n_branch:
            raise InputError(f"branch point {b + 1} out of range 1..{curve.n_branch}")
    if "variation" in which:
        rs = [check_variation(curve, basis, i, cfg.step, P) for i in idx]
        for r in rs:
            r["passed"] = r["error"] <= cfg.tolerances["variation"] and _order_ok(r["error"], r["error_half"])
            r["branch_point"] += 1
        out["variation"] = {"runs": rs, "passed": all(r["passed"] for r in rs)}
    if "lambda-derivative" in which:
        rs = [check_lambda_derivative(curve, basis, ad, part, i, cfg.step, P) for i in idx]
        for r in rs:
            r["passed"] = r["error"] <= cfg.tolerances["lambda"] and _order_ok(r["error"], r["error_half"])
            r["branch_point"] += 1
        out["lambda-derivative"] = {"runs": rs, "passed": all(r["passed"] for r in rs)}
    return out


def cmd_verify(cfg: RunConfig) -> tuple[dict, int, str]:
    curve, basis, P, ad = _setup(cfg)
    parts = _partitions(cfg, curve)
    tol = cfg.tolerances
    report = build_report(curve, P, ad, parts, tol["char"], tol["spread"], tol["residual"], cfg.parallel)
    checks = report.checks
    if "thomae" in cfg.checks:
        checks["thomae"] = {"spread": report.spread, "residual": report.residual,
                            "passed": report.spread <= tol["spread"] and report.residual <= tol["residual"]}
    if "vanishing" in cfg.checks:
        ratios = {str(p): check_derivative_vanishing(curve, P, ad, p) for p in parts}
        v = {"ratios": ratios, "max_ratio": max(ratios.values()), "tol": tol["vanish"]}
        ok = v["max_ratio"] <= tol["vanish"]
        if cfg.control:
            ch = control_characteristic(curve.N, P.g, cfg.seed, [r.characteristic.char for r in report.records])
            c = vanishing_ratio(P.tau, ch)
            a, b = ch.integers()
            v["control"] = {"denominator": ch.denominator, "delta_numerators": a, "eps_numerators": b,
                            "ratio": c, "tol": tol["control"], "non_vanishing": c > tol["control"]}
            ok = ok and c > tol["control"]
        v["passed"] = ok
        checks["vanishing"] = v
    if "exchange" in cfg.checks:
        rs = [check_exchange_ratio(curve, P, ad, p) for p in parts]
        dev = max(r["deviation"] for r in rs)
        checks["exchange"] = {"runs": rs, "max_deviation": dev, "passed": dev <= tol["exchange"]}
    if "szego" in cfg.checks or "fay" in cfg.checks:
        sz = _szego_checks(cfg, curve, P, ad, parts)
        for k in ("szego", "fay"):
            if k in cfg.checks:
                checks[k] = sz[k] | {"pairs": sz["pairs"], "odd_characteristic": sz["odd_characteristic"]}
    which = [k for k in ("variation", "lambda-derivative") if k in cfg.checks]
    if which:
        checks.update(_variation_checks(cfg, curve, basis, P, ad, parts[0], which))
    if "hyperelliptic" in cfg.checks and curve.N == 2:
        h = hyperelliptic_constant(report.records, curve.m, tol["hyperelliptic"])
        h["passed"] = True       # reported, not gating
        h["flagged"] = not h["satisfied"]
        checks["hyperelliptic"] = h
    doc = {"report": report.to_dict(), "periods": P.to_dict()}
    return doc, EXIT_OK if report.passed else EXIT_FAIL, report.to_csv()


def cmd_tables(cfg: RunConfig) -> tuple[dict, int, str]:
    tables = []
    rows = [["N", "quantity", "i", "j", "value"]]
    for N in cfg.N:
        summ = exponent_summary(N)
        qt = q_table(N)
        summ["q"] = [[frac_str(x) for x in row] for row in qt]
        summ["weighted_sum_identity"] = weighted_sum_check(N)
        rows.append([N, "mu", "", "", summ["mu"]])
        for i in range(N):
            for j in range(N):
                rows.append([N, "q", i, j, frac_str(qt[i][j])])
        for d, v in summ["exponent_by_difference"].items():
            rows.append([N, "exponent", 0, d, v])
        if cfg.partitions:
            summ["partitions"] = {}
            for p in cfg.partitions:
                if p.N != N:
                    continue
                t = thomae_exponents(N, p)
                n = len(t.k)
                summ["partitions"][str(p)] = [[i + 1, j + 1, frac_str(t.exponent(i, j))]
                                              for i in range(n) for j in range(i + 1, n)]
        tables.append(summ)
    ok = all(t["weighted_sum_identity"] for t in tables)
    return {"tables": tables}, EXIT_OK if ok else EXIT_FAIL, _rows_csv(rows)


def cmd_szego(cfg: RunConfig) -> tuple[dict, int, str]:
    curve, basis, P, ad = _setup(cfg)
    parts = _partitions(cfg, curve)
    sz = _szego_checks(cfg, curve, P, ad, parts)
    doc = {"curve": curve.to_dict(), "szego": sz["szego"], "fay": sz["fay"],
           "odd_characteristic": sz["odd_characteristic"], "pairs": sz["pairs"],
           "passed": sz["szego"]["passed"] and sz["fay"]["passed"]}
    rows = [["partition", "max_deviation", "max_modulus_deviation"]]
    rows += [[r["partition"], repr(r["max_deviation"]), repr(r["max_modulus_deviation"])]
             for r in sz["szego"]["partitions"]]
    return doc, EXIT_OK if doc["passed"] else EXIT_FAIL, _rows_csv(rows)


def cmd_variation(cfg: RunConfig) -> tuple[dict, int, str]:
    curve, basis, P, ad = _setup(cfg)
    parts = _partitions(cfg, curve)
    res = _variation_checks(cfg, curve, basis, P, ad, parts[0])
    doc = {"curve": curve.to_dict(), **res, "passed": all(r["passed"] for r in res.values())}
    rows = [["check", "branch_point", "h", "error", "error_half"]]
    for k, v in res.items():
        rows += [[k, r["branch_point"], repr(r["h"]), repr(r["error"]), repr(r["error_half"])] for r in v["runs"]]
    return doc, EXIT_OK if doc["passed"] else EXIT_FAIL, _rows_csv(rows)


COMMANDS = {"periods": cmd_periods, "verify": cmd_verify, "tables": cmd_tables, "szego": cmd_szego,
            "variation": cmd_variation}


# argument handling ------------------------------------------------------------------------

def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="znthomae", description="Thomae formula verification for Z_N curves.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--n", type=_int_list, required=True, help="N (tables accepts a list such as 2,3,4,5)")
    ap.add_argument("--m", type=int, help="branch points per sheet class; Nm points in total")
    ap.add_argument("--lambdas", help="file with branch points (JSON or one complex per line)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--min-separation", type=float, default=0.15)
    ap.add_argument("--partition", action="append", default=[], help='1-based, e.g. "1,4|2,5|3,6"; repeatable')
    for k, v in DEFAULT_TOLS.items():
        ap.add_argument(f"--tol-{k}", type=float, default=v, dest=f"tol_{k}")
    ap.add_argument("--precision", default="double", help="double | extended:<bits>")
    ap.add_argument("--report", help="JSON output path (default stdout)")
    ap.add_argument("--csv", help="CSV mirror path")
    ap.add_argument("--check", help=f"comma-separated subset of {','.join(CHECKS)}")
    ap.add_argument("--control", action="store_true", help="add a negative-control characteristic")
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--pairs", type=int, default=20, help="sample pairs for the Szego comparison")
    ap.add_argument("--branch", type=_int_list, default=[1, 2], help="1-based branch points for variation checks")
    ap.add_argument("--step", type=float, help="finite-difference step (default 1e-4 times the curve size)")
    ap.add_argument("--timing", action="store_true", help="print the runtime to stderr")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    lambdas, source = None, "seeded"
    N = args.n
    if args.lambdas:
        try:
            lambdas, n_file = load_lambdas(args.lambdas)
        except OSError as exc:
            raise InputError(f"cannot read {args.lambdas}: {exc}") from exc
        if n_file is not None and N != [n_file]:
            raise InputError(f"--n {N} conflicts with N={n_file} in {args.lambdas}")
        source = "file"
    checks = CHECKS if not args.check else tuple(c.strip() for c in args.check.split(",") if c.strip())
    parts = [OrderedPartition.parse(p) for p in args.partition]
    cfg = RunConfig(command=args.command, N=N, m=args.m, lambdas=lambdas, lambda_source=source, seed=args.seed,
                    min_separation=args.min_separation, partitions=parts,
                    tolerances={k: float(getattr(args, f"tol_{k}")) for k in DEFAULT_TOLS},
                    precision=args.precision, report=args.report, csv=args.csv, checks=checks,
                    parallel=args.parallel, control=args.control, pairs=args.pairs,
                    branch_points=tuple(args.branch), step=args.step)
    cfg.validate()
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n"


def run(cfg: RunConfig) -> tuple[dict, int, str]:
    with theta_tolerance(cfg.tolerances["theta"]):
        return COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    t0 = time.perf_counter()
    cfg = None
    try:
        cfg = config_from_args(args)
        doc, code, csv_text = run(cfg)
        doc = {"provenance": cfg.provenance(), **doc, "exit_code": code}
    except (InputError, CurveValidationError, PartitionError, DomainError) as exc:
        code, csv_text = EXIT_INPUT, None
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}, "exit_code": code}
    except (ZNError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        code, csv_text = EXIT_NUMERIC, None
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}, "exit_code": code}
    if cfg is not None and "provenance" not in doc:
        doc["provenance"] = cfg.provenance()
    _emit(_dump(doc), args.report)
    if csv_text is not None and args.csv:
        Path(args.csv).write_text(csv_text)
    if args.timing:
        print(f"runtime {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
