"""Batch front-end: read an INI-style config, run analyses, write a JSON report and CSV data.

Exit status: 0 when every requested analysis ran, 2 when some were skipped
because a hypothesis gate failed (they are listed in the report), 1 on hard
errors such as a malformed expression or an unwritable output directory.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import acceptance
from ._jit import backend_name
from ._report import HypothesisError, jsonable
from .bounds import (LOG_INTEGRAL_CLAUSES, SYSTEM_CLAUSES, log_integral_bounds, riccati_envelope,
                     stability_check, system_envelopes)
from .coeffexpr import CoeffExprError, ExprSyntaxError, as_expr
from .integrate import IntegrationError, RiccatiSpec, SystemSpec, solve_riccati, solve_system, to_csv
from .nonconj import case_report, nonconjugation_check
from .oscillation import classify_oscillation, leighton_test, second_order_system
from .quadrature import cumulative
from .riccati import (BracketError, classify_solution_role, find_bracket, integral_verdicts, reg_boundary,
                      sign_pattern_check, sign_pattern_predict)
from .systemreg import classify_regularity

COMMANDS = ("classify", "riccati", "stability", "bounds", "nonconj", "regularity", "portrait", "check")
FAMILIES = ("riccati-fan", "system-plane", "phi-T")
BLOCKS = ("system", "riccati", "scalar")


class ConfigError(ValueError):
    """Config problem; the message carries ``file:line`` or the block and key."""


# ---------------------------------------------------------------- config


@dataclass
class AnalysisConfig:
    kind: str  # system | riccati | scalar
    system: SystemSpec
    riccati: Optional[RiccatiSpec]
    horizon: float
    tol: Optional[float] = None
    inits: list = field(default_factory=lambda: list(np.linspace(-1.5, 1.5, 7)))
    init_pair: tuple = (1.0, 0.0)
    init_grid: int = 16
    family: Optional[str] = None
    arclength: bool = False
    samples: int = 400
    source: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return jsonable({"kind": self.kind, "input": self.source, "horizon": self.horizon, "tol": self.tol,
                         "inits": self.inits, "init_pair": self.init_pair, "init_grid": self.init_grid,
                         "family": self.family, "arclength": self.arclength, "samples": self.samples})


def _unquote(v: str) -> str:
    v = v.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1]
    return v


def _line_of(text: str, section: str, key: str) -> Optional[int]:
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


def _floats(v: str, where: str) -> list:
    try:
        return [float(x) for x in re.split(r"[,\s]+", _unquote(v)) if x]
    except ValueError as err:
        raise ConfigError(f"{where}: expected numbers, got {v!r}") from err


def parse_config(text: str, name: str = "<config>") -> AnalysisConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=name)
    except configparser.Error as err:
        raise ConfigError(str(err)) from err
    present = [b for b in BLOCKS if cp.has_section(b)]
    if len(present) != 1:
        raise ConfigError(f"{name}: exactly one of [system], [riccati], [scalar] is required, found {present or 'none'}")
    kind = present[0]
    block = cp[kind]
    allowed = {"system": ("a11", "a12", "a21", "a22", "t0"), "riccati": ("a", "b", "c", "t0"),
               "scalar": ("p", "q", "r", "t0")}[kind]

    def loc(key):
        line = _line_of(text, kind, key)
        return f"{name}:{line} [{kind}] {key}" if line else f"{name} [{kind}] {key}"

    for key in block:
        if key not in allowed:
            raise ConfigError(f"{loc(key)}: unknown key")
    exprs = {}
    for key in allowed[:-1]:
        raw = _unquote(block.get(key, "1" if (kind, key) == ("scalar", "p") else "0"))
        try:
            exprs[key] = as_expr(raw)
        except ExprSyntaxError as err:
            raise ConfigError(f"{loc(key)}: {err}") from err
    try:
        t0 = float(_unquote(block.get("t0", "0")))
    except ValueError as err:
        raise ConfigError(f"{loc('t0')}: not a number") from err
    spec = None
    if kind == "system":
        sys_ = SystemSpec(exprs["a11"], exprs["a12"], exprs["a21"], exprs["a22"], t0)
    elif kind == "riccati":
        spec = RiccatiSpec(exprs["a"], exprs["b"], exprs["c"], t0)
        # x = psi/phi for phi' = b phi + a psi, psi' = -c phi
        sys_ = SystemSpec(exprs["b"], exprs["a"], -exprs["c"], "0", t0)
    else:
        sys_ = second_order_system(exprs["r"], t0, exprs["p"], exprs["q"])
    source = {k: _unquote(v) for k, v in block.items()}

    an = cp["analysis"] if cp.has_section("analysis") else {}
    where = f"{name} [analysis]"
    try:
        horizon = float(_unquote(an.get("horizon", str(t0 + 50.0))))
        tol = an.get("tol")
        tol = float(_unquote(tol)) if tol is not None else None
        init_grid = int(_unquote(an.get("init_grid", "16")))
        samples = int(_unquote(an.get("samples", "400")))
    except ValueError as err:
        raise ConfigError(f"{where}: {err}") from err
    cfg = AnalysisConfig(kind, sys_, spec, horizon, tol, init_grid=init_grid, samples=samples, source=source)
    if "inits" in an:
        cfg.inits = _floats(an["inits"], f"{where} inits")
    if "init" in an:
        pair = _floats(an["init"], f"{where} init")
        if len(pair) != 2:
            raise ConfigError(f"{where} init: expected two numbers (phi, psi)")
        cfg.init_pair = tuple(pair)
    if "family" in an:
        cfg.family = _unquote(an["family"])
    if "arclength" in an:
        cfg.arclength = _unquote(an["arclength"]).lower() in ("1", "true", "yes", "on")
    validate(cfg)
    return cfg


def validate(cfg: AnalysisConfig) -> None:
    if not cfg.horizon > cfg.system.t0:
        raise ConfigError(f"horizon {cfg.horizon} must exceed t0 {cfg.system.t0}")
    if cfg.tol is not None and not cfg.tol > 0:
        raise ConfigError("tol must be positive")
    if cfg.family is not None and cfg.family not in FAMILIES:
        raise ConfigError(f"unknown portrait family {cfg.family!r}; expected one of {', '.join(FAMILIES)}")


def load_config(path) -> AnalysisConfig:
    p = Path(path)
    return parse_config(p.read_text(encoding="utf-8"), str(p))


# ---------------------------------------------------------------- analyses


def _snake(word: str) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", str(word)).lower()


class Session:
    """Runs analyses, collecting results and gate failures for the report."""

    def __init__(self, cfg: AnalysisConfig):
        self.cfg = cfg
        self.results: dict = {}
        self.summary: dict = {}
        self.skipped: list = []
        self.files: list = []

    def attempt(self, name: str, fn: Callable):
        try:
            out = fn()
        except HypothesisError as err:
            self.skipped.append({"analysis": name, "gate": err.gate, "reason": str(err),
                                 "evidence": jsonable(err.evidence)})
            return None
        self.results[name] = jsonable(out)
        return out


def do_classify(s: Session):
    cfg = s.cfg
    oc = s.attempt("oscillation", lambda: classify_oscillation(cfg.system, cfg.horizon, tol=cfg.tol))
    if oc is not None:
        s.summary["oscillation_class"] = _snake(oc.cls)
    lt = s.attempt("leighton", lambda: leighton_test(cfg.system))
    if lt is not None:
        s.summary["leighton"] = _snake(lt.verdict)


def do_riccati(s: Session):
    cfg = s.cfg
    spec = cfg.riccati or cfg.system.riccati()
    t0, T = spec.t0, cfg.horizon
    s.attempt("integral_verdicts", lambda: integral_verdicts(spec))

    def regular_set():
        try:
            lo, hi, probes = find_bracket(spec, t0, T, limit=1e4, tol=cfg.tol, both_directions=True)
        except BracketError as err:
            return {"regular_set": "empty" if not any(ok for _, ok in err.probes) else "unbounded",
                    "probes": err.probes, "note": str(err)}
        x_star = reg_boundary(spec, t0, (lo, hi), horizon=T, tol=cfg.tol, check_sign=False)
        return {"regular_set": "half-line", "extremal_initial_value": x_star, "bracket": [lo, hi]}

    rs = s.attempt("regular_set", regular_set)
    if rs is not None:
        s.summary["regular_set"] = rs["regular_set"]
        if "extremal_initial_value" in rs:
            s.summary["extremal_initial_value"] = rs["extremal_initial_value"]
    roles = {}
    for x in cfg.inits:
        role = s.attempt(f"role[{x:g}]", lambda x=x: classify_solution_role(spec, x, t0, horizon=T, tol=cfg.tol))
        if role is None:
            continue
        roles[f"{x:g}"] = _snake(role.role)

        def pattern(x=x):
            pred = sign_pattern_predict(spec, x, t0, T)
            traj = solve_riccati(spec, x, (t0, T), cfg.tol)
            return {"predicted": pred, "check": sign_pattern_check(pred, traj)}

        s.attempt(f"sign_pattern[{x:g}]", pattern)
    s.summary["roles"] = roles


def do_stability(s: Session):
    v = s.attempt("stability", lambda: stability_check(s.cfg.system, s.cfg.horizon, s.cfg.tol))
    if v is not None:
        s.summary["stability"] = _snake(v.verdict)


def do_bounds(s: Session):
    cfg = s.cfg
    verdicts = {}
    if cfg.riccati is not None:
        spec = cfg.riccati
        for x in cfg.inits:
            env = s.attempt(f"envelope_218[{x:g}]",
                            lambda x=x: riccati_envelope(spec, x, cfg.horizon, cfg.tol))
            if env is not None:
                verdicts[f"envelope_218[{x:g}]"] = env.check.verdict.lower()
        for which in LOG_INTEGRAL_CLAUSES:
            kw = {"x_init": max(cfg.inits)} if which == "positive_258" else {}
            env = s.attempt(f"log_integral[{which}]",
                            lambda which=which, kw=kw: log_integral_bounds(spec, which, cfg.horizon, tol=cfg.tol, **kw))
            if env is not None:
                verdicts[f"log_integral[{which}]"] = env.check.verdict.lower()
    else:
        for which in SYSTEM_CLAUSES:
            env = s.attempt(f"system[{which}]",
                            lambda which=which: system_envelopes(cfg.system, cfg.init_pair, which,
                                                                 cfg.horizon, cfg.tol))
            if env is not None:
                verdicts[f"system[{which}]"] = env.check.verdict.lower()
    s.summary["envelopes"] = verdicts


def do_nonconj(s: Session):
    cfg = s.cfg
    v = s.attempt("nonconjugation", lambda: nonconjugation_check(cfg.system, cfg.horizon, cfg.init_grid, cfg.tol))
    if v is not None:
        s.summary["nonconjugation"] = _snake(v.verdict)
        s.summary["max_zero_items"] = v.max_items
    rep = s.attempt("case_report", lambda: case_report(cfg.system, cfg.horizon, cfg.tol))
    if rep is not None:
        s.summary["case_report"] = _snake(rep.verdict)
        s.summary["clause"] = rep.details.get("clause")


def do_regularity(s: Session):
    rc = s.attempt("regularity", lambda: classify_regularity(s.cfg.system, s.cfg.horizon, tol=s.cfg.tol))
    if rc is not None:
        s.summary["regularity_class"] = _snake(rc.cls)


# ---------------------------------------------------------------- portraits


PORTRAIT_COLUMNS = {
    "riccati-fan": ("x", "solution of the Riccati equation; members that blow up stop at the escape time"),
    "system-plane": ("Phi,Psi", "J_{-a11} phi and J_{-a22} psi, both weights anchored at t0"),
    "phi-T": ("Phi_T", "exp(-int_T^t a11) phi(t), T the right end of the span"),
}


def arclength_grid(t: np.ndarray, cols: np.ndarray, n: int) -> np.ndarray:
    """Times spaced uniformly in arclength of the curve ``cols(t)`` (columns stacked)."""
    d = np.sqrt(np.sum(np.diff(cols, axis=0) ** 2, axis=1))
    s = np.concatenate([[0.0], np.cumsum(d)])
    if s[-1] == 0:
        return np.linspace(t[0], t[-1], n)
    return np.interp(np.linspace(0.0, s[-1], n), s, t)


def _write_csv(path: Path, header: list, t: np.ndarray, cols: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(t.size):
            fh.write(",".join(repr(float(v)) for v in (t[i], *cols[i])) + "\n")


def emit_portrait(system: SystemSpec, family: str, out_dir, inits=None, horizon: float = 20.0, tol=None,
                  spec: Optional[RiccatiSpec] = None, arclength: bool = False, samples: int = 400,
                  threads: int = 1) -> list:
    """Write one CSV per family member plus a ``columns.txt`` sidecar; returns the member files."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = system.t0
    T = float(horizon)
    if family == "riccati-fan":
        spec = spec or system.riccati()
        inits = list(np.linspace(-1.5, 1.5, 7)) if inits is None else list(inits)
    else:
        if inits is None:
            inits = [float(a) for a in np.pi * np.arange(8) / 8]
        inits = list(inits)

    def member(k, v):
        if family == "riccati-fan":
            traj = solve_riccati(spec, v, (spec.t0, T), tol)
            t = traj.refined_times(4)
            cols = traj(t)[:, :1]
            names = ["x"]
            extra = {"x_init": v, "blowup": traj.blowup}
        else:
            init = (math.cos(v), math.sin(v))
            traj = solve_system(system, init, (t0, T), tol)
            t = traj.refined_times(4)
            y = traj(t)
            i11 = cumulative(system.a11, t0, T, breakpoints=traj.times)(t)
            if family == "system-plane":
                i22 = cumulative(system.a22, t0, T, breakpoints=traj.times)(t)
                cols = np.column_stack([np.exp(-i11) * y[:, 0], np.exp(-i22) * y[:, 1]])
                names = ["Phi", "Psi"]
            else:
                iT = float(cumulative(system.a11, t0, T)(T))
                cols = (np.exp(iT - i11) * y[:, 0])[:, None]
                names = ["Phi_T"]
            extra = {"theta0": v, "init": init}
        if arclength:
            g = arclength_grid(t, np.column_stack([t, cols]) if cols.shape[1] == 1 else cols, samples)
            cols = np.interp(g, t, cols[:, 0])[:, None] if cols.shape[1] == 1 else np.column_stack(
                [np.interp(g, t, cols[:, j]) for j in range(cols.shape[1])])
            t = g
        path = out / f"{family}_{k:03d}.csv"
        _write_csv(path, ["t", *names], t, cols)
        return jsonable({"file": path.name, "rows": int(t.size), **extra})

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            members = list(pool.map(lambda kv: member(*kv), enumerate(inits)))
    else:
        members = [member(k, v) for k, v in enumerate(inits)]
    cols, meaning = PORTRAIT_COLUMNS[family]
    (out / f"{family}_columns.txt").write_text(
        f"family: {family}\ncolumns: t,{cols}\n{meaning}\n"
        f"grid: {'uniform in arclength' if arclength else 'solver nodes refined 4x'}\n", encoding="utf-8")
    return members


def do_portrait(s: Session, out_dir: Path, threads: int):
    cfg = s.cfg
    family = cfg.family or ("riccati-fan" if cfg.kind == "riccati" else "system-plane")
    inits = cfg.inits if family == "riccati-fan" else None
    members = emit_portrait(cfg.system, family, out_dir / "portrait", inits, cfg.horizon, cfg.tol, cfg.riccati,
                            cfg.arclength, cfg.samples, threads)
    s.results["portrait"] = {"family": family, "members": members}
    s.summary["portrait_files"] = len(members)
    s.summary["truncated_members"] = sum(1 for m in members if m.get("blowup"))


HANDLERS = {"classify": do_classify, "riccati": do_riccati, "stability": do_stability, "bounds": do_bounds,
            "nonconj": do_nonconj, "regularity": do_regularity}


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="planar-riccati", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI-style config file (required except for check)")
    ap.add_argument("--horizon", type=float, help="override [analysis] horizon")
    ap.add_argument("--tol", type=float, help="solver relative tolerance")
    ap.add_argument("--out", default="planar_riccati_out", help="output directory")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--criteria", help="comma-separated criterion numbers for check")
    return ap


def _write_report(out_dir: Path, command: str, body: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {"command": command, "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
              "backend": backend_name(), **body}
    path = out_dir / f"report-{command}.json"
    path.write_text(json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def run_check(args) -> int:
    numbers = [int(x) for x in args.criteria.split(",")] if args.criteria else None
    results = acceptance.run(numbers, seed=args.seed, threads=args.threads,
                             on_result=lambda r: print(r.line(), flush=True))
    failed = [r.number for r in results if not r.passed]
    path = _write_report(Path(args.out), "check", {
        "seed": args.seed, "summary": {"passed": len(results) - len(failed), "failed": failed},
        "results": [r.as_dict() for r in results]})
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed; report {path}")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return run_check(args)
        if not args.config:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config)
        if args.horizon is not None:
            cfg.horizon = args.horizon
        if args.tol is not None:
            cfg.tol = args.tol
        validate(cfg)
        s = Session(cfg)
        out_dir = Path(args.out)
        if args.command == "portrait":
            do_portrait(s, out_dir, args.threads)
        else:
            HANDLERS[args.command](s)
        path = _write_report(out_dir, args.command, {
            "config": cfg.as_dict(), "summary": s.summary, "results": s.results, "skipped": s.skipped})
    except (ConfigError, CoeffExprError, IntegrationError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for k in sorted(s.summary):
        print(f"{k}: {s.summary[k]}")
    for sk in s.skipped:
        print(f"skipped {sk['analysis']}: {sk['reason']}")
    print(f"report: {path}")
    return 2 if s.skipped else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
