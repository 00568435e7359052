"""Command line front end: ``bandspec validate | diagnose | scan``.

Exit codes: 0 on success, 2 when the operator file does not parse or
validate (or arguments are invalid), 3 on I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import analysis
from .analysis import classify, f_spread, growth_report, lemma2_residual, solution_pairs
from .bandop import BandOperator, validate
from .errors import BandspecError, ParseError, ValidationError
from .kernel import resolvent_residual
from .recurrence import extend, recurrence_residual
from .weyl import DEFAULT_TOL

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3
DEFAULT_K = 150
DEFAULT_M0 = 100
VALIDATE_K = 200
MAX_POINTS = 10**6
CSV_HEADER = ("re", "im", "class", "q_hat", "C_hat", "rms_residual", "weyl_gap", "error")

# tolerances reported by diagnose
TOL_RECURRENCE = 1e-10
TOL_INVARIANT = 1e-9
TOL_IDENTITY = 1e-9
TOL_OVERLAP = 1e-9
TOL_RESOLVENT = 1e-8


def load_operator(path, K=VALIDATE_K) -> BandOperator:
    """Read an operator file and validate it through index `K`.

    Raises
    ------
    OSError
        If the file cannot be read.
    ParseError
        On malformed JSON (with its line) or schema violations (with the field).
    ValidationError
        If an extreme diagonal block fails the condition cap.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    op = BandOperator.from_dict(obj)
    rep = validate(op, max(K, op.r + op.s))
    if not rep.ok:
        bad = ", ".join(f"k={k} {which} (cond {c:.3g})" for k, which, c in rep.failures[:5])
        raise ValidationError(f"{len(rep.failures)} extreme diagonal blocks fail the condition cap: {bad}", rep)
    return op


# ---------------------------------------------------------------------------
# diagnose


def _check(name, value, tol):
    value = float(value)
    return {"name": name, "value": value, "tol": tol, "pass": bool(value <= tol)}


def diagnose(op, lam, K=DEFAULT_K, M0=DEFAULT_M0, tol=DEFAULT_TOL, eps_class=analysis.EPS_CLASS,
             fit_tol=analysis.FIT_TOL) -> dict:
    """Run the full single-point pipeline and collect every check.

    Failures of the Weyl estimate or the fit do not raise; they show up as
    an ``inconclusive`` classification and entries in ``tags``.
    """
    lam = complex(lam)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit, parts = classify(op, lam, K, M0, tol, eps_class, fit_tol, return_parts=True)
    notes = [str(w.message) for w in caught]
    notes += [n for n in fit.notes if n not in notes]
    tags = [fit.error] if fit.error else []

    basis = parts["basis"] or extend(op, lam, K)
    checks = []
    r, s = op.r, op.s
    kf, kd = basis.K_forward - r, basis.K_dual - s
    rec = max(
        [recurrence_residual(op, basis, nm, k) for nm in ("Q", "P") for k in range(kf + 1)]
        + [recurrence_residual(op, basis, nm, k) for nm in ("Qplus", "Pplus") for k in range(kd + 1)]
    )
    checks.append(_check("recurrence_residual", rec, TOL_RECURRENCE))
    kmax = min(30, basis.K - max(r, s))
    spread = max(f_spread(op, y, yp, basis, kmax) for y, yp in solution_pairs(op)) if kmax >= 1 else 0.0
    checks.append(_check("f_invariant_spread", spread, TOL_INVARIANT))
    kmax = min(25, basis.K - max(r, s))
    lem2 = max(lemma2_residual(op, basis, k) for k in range(kmax + 1))
    checks.append(_check("lemma2_residual", lem2, TOL_IDENTITY))

    weyl, win = parts["weyl"], parts["window"]
    growth = None
    if weyl is not None and win is not None:
        checks.append(_check("kernel_overlap_gap", win.overlap_gap, TOL_OVERLAP))
        W = min(30, win.k_range[1] - r)
        checks.append(_check("resolvent_residual", resolvent_residual(op, basis, weyl, W), TOL_RESOLVENT))
        ident = max(analysis.decaying_identity_residual(op, basis, weyl, k) for k in range(W + 1))
        checks.append(_check("decaying_identity_residual", ident, TOL_RESOLVENT))
        if basis.K >= 50:
            growth = growth_report(basis, weyl, 0.2, classification=fit.classification)
            checks.append({"name": "growth_flags", "value": len(growth.flags), "tol": 0,
                           "pass": not growth.flags})
        else:
            notes.append("growth report skipped: K below 50")
    return {
        "lambda": [lam.real, lam.imag],
        "classification": fit.classification,
        "q_hat": _num(fit.q_hat),
        "C_hat": _num(fit.C_hat),
        "rms_residual": _num(fit.rms_residual),
        "weyl_gap": _num(fit.weyl_gap),
        "M_used": weyl.M_used if weyl is not None else None,
        "weyl_matrix": _encode_blocks(weyl.blocks) if weyl is not None else None,
        "tags": tags,
        "notes": notes,
        "checks": checks,
        "growth": growth.to_dict() if growth is not None else None,
        "backend": _backend_name(),
    }


def _backend_name():
    from ._backend import BACKEND

    return BACKEND


def _encode_blocks(blocks):
    return [[[[z.real, z.imag] for z in b.ravel()] for b in row] for row in blocks]


def _num(x):
    return None if x is None or not math.isfinite(x) else float(x)


def format_report(rep) -> str:
    lam = complex(*rep["lambda"])
    out = [f"lambda          {lam.real:.6g}{lam.imag:+.6g}j", f"classification  {rep['classification']}"]
    for key in ("q_hat", "C_hat", "rms_residual", "weyl_gap", "M_used"):
        v = rep[key]
        out.append(f"{key:<15} {'n/a' if v is None else format(v, '.10g')}")
    if rep["tags"]:
        out.append("tags            " + ",".join(rep["tags"]))
    for note in rep["notes"]:
        out.append(f"warning: {note}")
    out.append("checks:")
    for c in rep["checks"]:
        out.append(f"  {'PASS' if c['pass'] else 'FAIL'}  {c['name']:<28} {c['value']:.3e}  (tol {c['tol']:g})")
    g = rep["growth"]
    if g:
        out.append(f"growth (k in {g['k_window'][0]}..{g['k_window'][1]}):")
        for key in ("rho_Q", "rho_R", "rho_Qplus", "rho_Rplus"):
            out.append(f"  {key:<10} " + " ".join(f"{v:.6g}" for v in g[key]))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# scan


@dataclass
class ScanSpec:
    """Grid scan parameters; rows run over ``im`` (outer) then ``re``."""

    operator: str
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int
    K: int = DEFAULT_K
    M0: int = DEFAULT_M0
    tol: float = DEFAULT_TOL
    eps_class: float = analysis.EPS_CLASS
    fit_tol: float = analysis.FIT_TOL
    workers: int = 1

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be positive")
        if self.nx * self.ny > MAX_POINTS:
            raise ValueError(f"grid of {self.nx * self.ny} points exceeds {MAX_POINTS}")
        if not (self.re_min < self.re_max or (self.nx == 1 and self.re_min == self.re_max)):
            raise ValueError("need re_min < re_max")
        if not (self.im_min < self.im_max or (self.ny == 1 and self.im_min == self.im_max)):
            raise ValueError("need im_min < im_max")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    def axis(self, lo, hi, n):
        if n == 1:
            return [float(lo)]
        step = (hi - lo) / (n - 1)
        return [lo + i * step for i in range(n)]

    def points(self):
        xs = self.axis(self.re_min, self.re_max, self.nx)
        ys = self.axis(self.im_min, self.im_max, self.ny)
        return [complex(x, y) for y in ys for x in xs]


@dataclass
class ScanRow:
    re: float
    im: float
    cls: str
    q_hat: float | None
    C_hat: float | None
    rms_residual: float | None
    weyl_gap: float | None
    error: str | None


@dataclass
class ScanResult:
    nx: int
    ny: int
    rows: list = field(default_factory=list)

    def to_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            w.writerow([_fmt(row.re), _fmt(row.im), row.cls, _fmt(row.q_hat), _fmt(row.C_hat),
                        _fmt(row.rms_residual), _fmt(row.weyl_gap), row.error or ""])

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fh, nx, ny):
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_HEADER:
            raise ParseError(f"unexpected CSV header {header}", line=1)
        rows = []
        for rec in rd:
            vals = [_unfmt(v) for v in rec[:2]] + [rec[2]] + [_unfmt(v) for v in rec[3:7]] + [rec[7] or None]
            rows.append(ScanRow(*vals))
        return cls(nx, ny, rows)

    def to_json(self):
        return {"nx": self.nx, "ny": self.ny, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["nx"], obj["ny"], [ScanRow(**r) for r in obj["rows"]])


def _fmt(x):
    return "nan" if x is None else format(x, ".17g")


def _unfmt(v):
    x = float(v)
    return None if math.isnan(x) else x


_WORKER = {}


def _init_worker(op_dict, params):
    _WORKER["op"] = BandOperator.from_dict(op_dict)
    _WORKER["params"] = params


def _scan_point(lam):
    op, p = _WORKER["op"], _WORKER["params"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            fit = classify(op, lam, **p)
        except BandspecError as exc:
            return ScanRow(lam.real, lam.imag, analysis.INCONCLUSIVE, None, None, None, None,
                           type(exc).__name__)
    return ScanRow(lam.real, lam.imag, fit.classification, _num(fit.q_hat), _num(fit.C_hat),
                   _num(fit.rms_residual), _num(fit.weyl_gap), fit.error)


def scan(spec: ScanSpec, op: BandOperator | None = None) -> ScanResult:
    """Classify every grid point; the row order does not depend on `workers`."""
    op = op if op is not None else load_operator(spec.operator)
    params = {"K": spec.K, "M0": spec.M0, "tol": spec.tol, "eps_class": spec.eps_class,
              "fit_tol": spec.fit_tol}
    pts = spec.points()
    op_dict = op.to_dict()
    if spec.workers == 1:
        _init_worker(op_dict, params)
        rows = [_scan_point(z) for z in pts]
    else:
        chunk = max(1, len(pts) // (8 * spec.workers))
        with ProcessPoolExecutor(spec.workers, initializer=_init_worker, initargs=(op_dict, params)) as ex:
            rows = list(ex.map(_scan_point, pts, chunksize=chunk))
    return ScanResult(spec.nx, spec.ny, rows)


# ---------------------------------------------------------------------------
# argument handling


def _parser():
    p = argparse.ArgumentParser(prog="bandspec", description="Spectral diagnostics for band operators.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check an operator file")
    v.add_argument("--operator", required=True)
    v.add_argument("--K", type=int, default=VALIDATE_K)

    def common(q):
        q.add_argument("--operator", required=True)
        q.add_argument("--K", type=int, default=DEFAULT_K)
        q.add_argument("--M0", type=int, default=DEFAULT_M0)
        q.add_argument("--tol", type=float, default=DEFAULT_TOL)

    d = sub.add_parser("diagnose", help="all checks at one lambda")
    common(d)
    d.add_argument("--re", type=float, required=True)
    d.add_argument("--im", type=float, default=0.0)
    d.add_argument("--json", help="also write the report as JSON")

    s = sub.add_parser("scan", help="classify a rectangular lambda grid")
    common(s)
    for name in ("--re-min", "--re-max", "--im-min", "--im-max"):
        s.add_argument(name, type=float, required=True)
    s.add_argument("--nx", type=int, required=True)
    s.add_argument("--ny", type=int, required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="CSV output path (default: stdout)")
    s.add_argument("--json", help="JSON output path")
    return p


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            with open(args.operator, encoding="utf-8") as fh:
                text = fh.read()
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=exc.lineno) from None
            op = BandOperator.from_dict(obj)
            rep = validate(op, max(args.K, op.r + op.s))
            print(json.dumps(rep.to_dict(), indent=2))
            return EXIT_OK if rep.ok else EXIT_INVALID

        op = load_operator(args.operator)
        if args.command == "diagnose":
            rep = diagnose(op, complex(args.re, args.im), args.K, args.M0, args.tol)
            print(format_report(rep))
            if args.json:
                _write(args.json, json.dumps(rep, indent=2))
            return EXIT_OK

        spec = ScanSpec(args.operator, args.re_min, args.re_max, args.im_min, args.im_max, args.nx, args.ny,
                        K=args.K, M0=args.M0, tol=args.tol, workers=args.workers)
        res = scan(spec, op)
        if args.out:
            _write(args.out, res.csv_text())
        else:
            sys.stdout.write(res.csv_text())
        if args.json:
            _write(args.json, json.dumps(res.to_json(), indent=2))
        return EXIT_OK
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"bandspec: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"bandspec: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
