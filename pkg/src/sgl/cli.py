"""Command-line front end: ``sgl {rays,solve,classify,trace,witness-search} --spec FILE``.

Exit codes: 0 success, 2 parse error, 3 invalid problem spec, 4 numerical
reliability failure, 5 internal error.
"""

from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jsonio
from .errors import DomainError, ParseError, ReliabilityError, StageError
from .exppoly import ComplexPoly, ExpPoly, evaluate, render, render_poly
from .lab import ProblemInstance, Reading, classify, proof_trace, witness_search
from .parser import parse_exppoly, parse_poly
from .rays import delta, partition
from .series import order_from_coeffs, taylor_solve_many

EXIT_OK, EXIT_PARSE, EXIT_SPEC, EXIT_RELIABILITY, EXIT_INTERNAL = 0, 2, 3, 4, 5

DEFAULTS = {
    "truncation": 1000,
    "r_max": 30.0,
    "rays_per_sector": None,  # per command: 1 for trace, 4 for hypothesis checks
    "reading": "conjunctive",
    "initial_conditions": [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
}


@dataclass(frozen=True)
class ProblemSpec:
    A: ExpPoly | None
    B: ExpPoly | None
    d: ExpPoly | None
    P: ComplexPoly | None
    ics: tuple[tuple[complex, complex], ...]
    N: int
    r_max: float
    rays_per_sector: int | None
    reading: Reading
    candidates: tuple[ExpPoly, ...] | None

    def instance(self) -> ProblemInstance:
        if self.A is None or self.B is None:
            raise DomainError("spec needs both 'A' and 'B'")
        if self.d is not None:
            return ProblemInstance(self.A, self.B, (self.d, self.P))
        return ProblemInstance.auto(self.A, self.B)


def _field_expr(raw: dict, key: str, poly: bool = False):
    if key not in raw or raw[key] is None:
        return None
    text = raw[key]
    if not isinstance(text, str):
        raise DomainError(f"'{key}' must be an expression string")
    try:
        return parse_poly(text) if poly else parse_exppoly(text)
    except ParseError as exc:
        raise ParseError(f"in '{key}': {exc.args[0]}") from exc


def load_spec(path: str | Path) -> ProblemSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read spec file: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(raw, dict):
        raise DomainError("spec must be a JSON object")
    A = _field_expr(raw, "A")
    B = _field_expr(raw, "B")
    d = P = None
    dec = raw.get("decomposition")
    if dec is not None:
        if not isinstance(dec, dict) or "P" not in dec:
            raise DomainError("'decomposition' must be an object with at least 'P'")
        P = _field_expr(dec, "P", poly=True)
        d = _field_expr(dec, "d")
    N = raw.get("truncation", DEFAULTS["truncation"])
    r_max = raw.get("r_max", DEFAULTS["r_max"])
    rps = raw.get("rays_per_sector", DEFAULTS["rays_per_sector"])
    if not isinstance(N, int) or isinstance(N, bool) or N < 100:
        raise DomainError("'truncation' must be an integer >= 100")
    if not isinstance(r_max, (int, float)) or isinstance(r_max, bool) or not r_max >= 10:
        raise DomainError("'r_max' must be a number >= 10")
    if rps is not None and (not isinstance(rps, int) or isinstance(rps, bool) or rps < 1):
        raise DomainError("'rays_per_sector' must be a positive integer")
    reading = str(raw.get("reading", DEFAULTS["reading"])).upper()
    if reading not in Reading.__members__:
        raise DomainError("'reading' must be 'conjunctive' or 'respective'")
    ics = []
    for row in raw.get("initial_conditions", DEFAULTS["initial_conditions"]):
        if not (isinstance(row, list) and len(row) == 4 and all(isinstance(x, (int, float)) for x in row)):
            raise DomainError("each initial condition is [f0_re, f0_im, f1_re, f1_im]")
        f0, f1 = complex(row[0], row[1]), complex(row[2], row[3])
        if f0 == 0 and f1 == 0:
            raise DomainError("initial condition (0, 0) gives the zero solution")
        ics.append((f0, f1))
    if not ics:
        raise DomainError("'initial_conditions' must not be empty")
    cands = None
    if "candidates" in raw:
        if not isinstance(raw["candidates"], list):
            raise DomainError("'candidates' must be a list of expressions")
        cands = tuple(_field_expr({"candidate": c}, "candidate") for c in raw["candidates"])
    if d is None and P is not None and A is not None:
        # d omitted: take it as A e^{-P}
        d = A.times_exp(-P)
    return ProblemSpec(A, B, d, P, tuple(ics), N, float(r_max), rps, Reading(reading), cands)


# --- output helpers ---------------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([jsonio.format_float(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _envelope(command: str, body: dict) -> dict:
    return {"schema_version": jsonio.SCHEMA_VERSION, "command": command, **body}


class _Output:
    def __init__(self, out_dir: str | None, stdout):
        self.dir = Path(out_dir) if out_dir else None
        self.stdout = stdout
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str, primary: bool = True):
        if self.dir is not None:
            (self.dir / name).write_text(text)
        elif primary:
            self.stdout.write(text)


# --- commands ---------------------------------------------------------------------


def _rays_poly(spec: ProblemSpec) -> ComplexPoly:
    if spec.P is not None:
        return spec.P
    if spec.A is not None and len(spec.A.terms) == 1 and spec.A.terms[0].k == 0:
        return spec.A.terms[0].Q
    raise DomainError("rays needs 'decomposition.P' or A of the form e^{P}")


def cmd_rays(spec: ProblemSpec, fmt: str, out: _Output, threads: int):
    P = _rays_poly(spec)
    part = partition(P)
    if fmt == "csv":
        pts = [(a, 0) for a in part.critical_angles]
        pts += [((s.mid) % (2 * math.pi), s.sign) for s in part.sectors]
        pts.sort()
        out.write("rays.csv", _csv_text(["angle", "sign"], [(float(a), s) for a, s in pts]))
        return
    body = {
        "P": render_poly(P),
        "n": part.n,
        "critical_angles": list(part.critical_angles),
        "sectors": [{"lo": s.lo, "hi": s.hi, "sign": s.sign} for s in part.sectors],
    }
    out.write("rays.json", jsonio.dumps(_envelope("rays", body)))


def _running_grid(N: int) -> list[int]:
    stride = max(1, N // 100)
    ks = [k for k in range(200, N + 1, stride)]
    if not ks or ks[-1] != N:
        ks.append(N)
    return ks


def cmd_solve(spec: ProblemSpec, fmt: str, out: _Output, threads: int):
    inst = spec.instance()
    sols = taylor_solve_many(inst.A, inst.B, spec.ics, spec.N, workers=threads)
    grid = _running_grid(spec.N)
    rows, entries = [], []
    for i, ((f0, f1), f) in enumerate(zip(spec.ics, sols)):
        running = {}
        for k in grid:
            est = order_from_coeffs(f.truncate(k))
            running[k] = ("polynomial", 0.0) if est.polynomial else ("", est.estimate)
        final = order_from_coeffs(f)
        la = f.log_abs()
        for k in range(spec.N + 1):
            flag, rho = running.get(k, ("", None))
            rows.append((i, k, float(la[k]), "" if rho is None else float(rho), flag))
        entries.append({
            "f0": f0, "f1": f1,
            "order": final.estimate,
            "polynomial": final.polynomial,
            "classical_sup": final.classical_sup,
            "running": [{"k": k, "rho": running[k][1], "flag": running[k][0]} for k in grid],
        })
    if fmt == "csv":
        out.write("solve.csv", _csv_text(["ic", "k", "log_abs_c", "rho_k", "flag"], rows))
    else:
        body = {"A": render(inst.A), "B": render(inst.B), "truncation": spec.N, "solutions": entries}
        out.write("solve.json", jsonio.dumps(_envelope("solve", body)))


def cmd_classify(spec: ProblemSpec, fmt: str, out: _Output, threads: int):
    inst = spec.instance()
    v = classify(inst, spec.reading, spec.rays_per_sector or 4, spec.r_max)
    if fmt == "csv":
        out.write("classify.csv", _csv_text(["rule", "predicted", "detail"], [(v.rule_applied.value, v.predicted.value, v.detail)]))
        return
    body = {
        "A": render(inst.A), "B": render(inst.B),
        "rho_A": inst.rho_A, "rho_B": inst.rho_B, "n": inst.n, "m": inst.m,
        "verdict": v,
    }
    out.write("classify.json", jsonio.dumps(_envelope("classify", body)))


def _ray_rows(inst: ProblemInstance, ray, eps: float = 0.5):
    tr = ray.trace
    e = cmath.exp(1j * tr.theta)
    P = inst.decomposition[1] if inst.decomposition is not None else None
    dl = delta(P, tr.theta) if P is not None else None
    n = int(P.degree()) if P is not None else None
    rows = []
    for r, u in zip(tr.radii, tr.values):
        logA = evaluate(inst.A, r * e).magnitude_log
        margin = "" if dl is None else float(logA - (1 - eps) * dl * r ** n)
        rows.append((float(r), float(u.real), float(u.imag), float(logA), margin))
    return rows


def cmd_trace(spec: ProblemSpec, fmt: str, out: _Output, threads: int):
    inst = spec.instance()
    rep = proof_trace(inst, spec.ics, spec.N, spec.r_max, spec.rays_per_sector or 1,
                      reading=spec.reading, workers=threads)
    if fmt == "csv":
        rows = []
        for i, s in enumerate(rep.solutions):
            for ray in s.rays:
                rows.append((i, float(ray.theta), ray.region, ray.status, float(ray.r_end),
                             float(abs(ray.u_end)), float(ray.limit.real), float(ray.limit.imag),
                             str(ray.limit_valid).lower()))
        out.write("trace.csv", _csv_text(
            ["ic", "theta", "region", "status", "r_end", "abs_u_end", "limit_re", "limit_im", "limit_valid"], rows))
    else:
        body = {"report": rep, "flag": rep.flag}
        out.write("trace.json", jsonio.dumps(_envelope("trace", body)))
    if out.dir is not None:
        for i, s in enumerate(rep.solutions):
            for j, ray in enumerate(s.rays):
                if ray.trace is not None:
                    out.write(f"ray_ic{i}_{j}.csv", _csv_text(["r", "re_u", "im_u", "log_abs_A", "margin"],
                                                              _ray_rows(inst, ray)), primary=False)


def cmd_witness(spec: ProblemSpec, fmt: str, out: _Output, threads: int):
    if spec.P is None:
        raise DomainError("witness-search needs 'decomposition.P'")
    n = int(spec.P.degree()) if not spec.P.is_constant() else 0
    if n < 1:
        raise DomainError("P must be non-constant")
    if spec.candidates is None:
        z = ComplexPoly.monomial(1.0, n + 1)
        cands = [ExpPoly.exp_of(z * c) for c in (1, 1j, -1, -1j)]
    else:
        cands = list(spec.candidates)
    B = spec.B if spec.B is not None else ExpPoly.z()
    res = witness_search(n, cands, spec.rays_per_sector or 4, P=spec.P, B=B,
                         reading=spec.reading, r_max=spec.r_max)
    if fmt == "csv":
        rows = [(r.candidate, str(r.passed).lower(), "" if r.witness_angle is None else float(r.witness_angle),
                 r.failed_condition or "") for r in res]
        out.write("witness.csv", _csv_text(["candidate", "passed", "witness_angle", "failed_condition"], rows))
        return
    body = {
        "P": render_poly(spec.P),
        "n_passed": sum(r.passed for r in res),
        "candidates": [
            {"candidate": r.candidate, "passed": r.passed, "witness_angle": r.witness_angle,
             "failed_condition": r.failed_condition,
             "rays": [{"theta": x.theta, "region": x.region, "growth": x.growth.classification,
                       "bounded_away": x.bounded_away, "passed": x.passed} for x in r.check.rays]}
            for r in res
        ],
    }
    out.write("witness.json", jsonio.dumps(_envelope("witness-search", body)))


COMMANDS = {
    "rays": cmd_rays,
    "solve": cmd_solve,
    "classify": cmd_classify,
    "trace": cmd_trace,
    "witness-search": cmd_witness,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", required=True, help="JSON problem spec file")
        s.add_argument("--out", default=None, help="output directory (default: stdout)")
        s.add_argument("--format", choices=("json", "csv"), default="json")
        s.add_argument("--threads", type=int, default=1, help="worker processes for independent solves")
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, DomainError):
        return EXIT_SPEC
    if isinstance(exc, ReliabilityError):
        return EXIT_RELIABILITY
    return EXIT_INTERNAL


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    # every sampling grid is deterministic; the seed is accepted for interface stability
    os.environ.get("SGL_SEED")
    np.seterr(all="ignore")
    try:
        spec = load_spec(args.spec)
        out = _Output(args.out, stdout)
        COMMANDS[args.command](spec, args.format, out, max(1, args.threads))
    except Exception as exc:  # mapped to documented exit codes
        code = _exit_code(exc)
        kind = {EXIT_PARSE: "parse error", EXIT_SPEC: "invalid spec",
                EXIT_RELIABILITY: "numerical reliability", EXIT_INTERNAL: "internal error"}[code]
        stderr.write(f"sgl: {kind}: {exc}\n")
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
