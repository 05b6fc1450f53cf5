"""Command-line front end.

Usage::

    bddc-lfa sweep     --config cfg.json [overrides]
    bddc-lfa optimize  --p 8 --n 8 --i 1 --mult f --grid 0.1:3.0:0.1
    bddc-lfa histogram --p 8 --n 32 --i 1 --out hist.csv
    bddc-lfa validate  --p 4 --m 4 --i 1

A config file is a JSON object whose keys are the long flag names (with
``_`` for ``-``).  Flags override the file.  ``p``, ``n``, ``i`` and ``j``
accept lists (comma-separated on the command line); every combination is
run.  Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import itertools
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .linalg import EigenvalueConvergenceError, SingularMatrixError
from .optimizer import DEFAULT_GRID_2D, OptimizationError, SweepGrid, optimize_1d, optimize_2d
from .oracle import (
    ArnoldiBreakdownError,
    MeshSizeError,
    assemble,
    finite_fine_wrap_curve,
    ritz_estimate,
    spectra_match,
)
from .preconditioners import COARSE_WEIGHT, MULT_MODES, PreconditionerSpec
from .spectrum import (
    SamplingPlan,
    SweepError,
    default_threads,
    histogram,
    sweep_many,
)
from .stencil import Q1_LAPLACIAN, Stencil9

log = logging.getLogger("bddc_lfa")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
COMMANDS = ("sweep", "optimize", "histogram", "validate")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


# ------------------------------------------------------------------ config
@dataclass
class RunConfig:
    command: str
    stencil: Any = "q1"
    p: List[int] = field(default_factory=lambda: [4])
    n: List[int] = field(default_factory=lambda: [8])
    i: List[int] = field(default_factory=lambda: [1])
    j: List[int] = field(default_factory=lambda: [0])
    mult: str = "none"
    omega: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    grid: Optional[str] = None
    grid2: Optional[str] = None
    m: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    curve_out: Optional[str] = None
    eigs_out: Optional[str] = None
    format: str = "csv"
    threads: Optional[int] = None
    method: str = "auto"
    bin_width: float = 0.1
    tol: float = 1e-8
    lfa_p: Optional[int] = None
    ritz: bool = True

    # -------------------------------------------------------- validation
    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command: expected one of {COMMANDS}, got {self.command!r}")
        for name in ("p", "n", "i", "j"):
            vals = _as_int_list(getattr(self, name), name)
            setattr(self, name, vals)
        for p in self.p:
            if p < 2:
                raise ConfigError(f"p: subdomain width must be >= 2, got {p}")
        for n in self.n:
            if n < 1:
                raise ConfigError(f"n: sampling half-resolution must be >= 1, got {n} (empty frequency plan)")
        for i in self.i:
            if i not in (1, 2):
                raise ConfigError(f"i: fine variant must be 1 or 2, got {i}")
        for j in self.j:
            if j not in (0, 1, 2):
                raise ConfigError(f"j: coarse variant must be 0, 1 or 2, got {j}")
        if self.mult not in MULT_MODES:
            raise ConfigError(f"mult: expected one of {MULT_MODES}, got {self.mult!r}")
        for name in ("omega", "omega1", "omega2", "bin_width", "tol"):
            v = getattr(self, name)
            if v is not None:
                try:
                    v = float(v)
                except (TypeError, ValueError):
                    raise ConfigError(f"{name}: expected a number, got {v!r}") from None
                if not math.isfinite(v) or v <= 0:
                    raise ConfigError(f"{name}: must be a positive finite number, got {v!r}")
                setattr(self, name, v)
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: expected 'csv' or 'json', got {self.format!r}")
        if self.method not in ("auto", "general", "hermitian"):
            raise ConfigError(f"method: expected auto, general or hermitian, got {self.method!r}")
        if self.threads is not None:
            self.threads = _as_int(self.threads, "threads")
            if self.threads < 1:
                raise ConfigError(f"threads: must be >= 1, got {self.threads}")
        self.seed = _as_int(self.seed, "seed")
        for name in ("grid", "grid2"):
            g = getattr(self, name)
            if g is not None:
                try:
                    setattr(self, name, _grid(g))
                except ValueError as exc:
                    raise ConfigError(f"{name}: {exc}") from None
        self.stencil_obj = _stencil(self.stencil)
        if self.command == "validate":
            if self.m is None:
                raise ConfigError("m: validate needs the number of subdomains per axis")
            self.m = _as_int(self.m, "m")
            if self.lfa_p is not None and _as_int(self.lfa_p, "lfa_p") not in self.p:
                raise ConfigError(f"lfa_p: symbol side p={self.lfa_p} does not match mesh p={self.p}")
            if self.stencil_obj != Q1_LAPLACIAN:
                raise ConfigError("stencil: validate assembles the Q1 Laplacian only")
        if self.command == "optimize" and self.mult == "none":
            raise ConfigError("mult: optimize needs a multiplicative mode with weights")
        # build every spec once so that spec-level errors surface before any work
        self.specs()
        return self

    def spec_kwargs(self, optimizing: bool) -> Dict[str, Any]:
        mult = self.mult
        if mult in ("f", "c"):
            w = self.omega if self.omega is not None else (1.0 if optimizing else None)
            return {"omega": w}
        if mult in ("sc", "fc"):
            w1 = self.omega1 if self.omega1 is not None else COARSE_WEIGHT
            w2 = self.omega2 if self.omega2 is not None else (1.0 if optimizing else None)
            return {"omega1": w1, "omega2": w2}
        return {}

    def specs(self) -> List[PreconditionerSpec]:
        optimizing = self.command == "optimize" or (self.command == "validate" and self.grid)
        kw = self.spec_kwargs(bool(optimizing))
        out = []
        for i, j in itertools.product(self.i, self.j):
            try:
                out.append(PreconditionerSpec(i, j, self.mult, **kw))
            except ValueError as exc:
                raise ConfigError(f"spec (i={i}, j={j}, mult={self.mult}): {exc}") from None
        return out


def _as_int(v, name) -> int:
    if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())
                                   or (isinstance(v, str) and v.strip().lstrip("-").isdigit())):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    return int(v)


def _as_int_list(v, name) -> List[int]:
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    if not isinstance(v, (list, tuple)):
        v = [v]
    if not v:
        raise ConfigError(f"{name}: empty list")
    return [_as_int(x, name) for x in v]


def _grid(g) -> SweepGrid:
    if isinstance(g, SweepGrid):
        return g
    if isinstance(g, (list, tuple)):
        return SweepGrid(*[float(x) for x in g])
    return SweepGrid.parse(g)


def _stencil(s) -> Stencil9:
    if isinstance(s, Stencil9):
        return s
    if isinstance(s, str):
        if s.lower() == "q1":
            return Q1_LAPLACIAN
        raise ConfigError(f"stencil: unknown name {s!r}; use 'q1' or nine coefficients")
    try:
        arr = np.asarray(s, dtype=float)
        if arr.size != 9:
            raise ValueError(f"expected 9 coefficients, got {arr.size}")
        return Stencil9.from_rows(arr.reshape(3, 3))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"stencil: {exc}") from None


_KNOWN = {f.name for f in fields(RunConfig)}


def load_config(path: str) -> Dict[str, Any]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(sorted(_KNOWN))}")
    return data


# ------------------------------------------------------------------ output
def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}"
    if v is None:
        return ""
    return str(v)


def _header_line(cfg: RunConfig, runtime: float) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return f"# bddc-lfa {cfg.command} generated {stamp} runtime {runtime:.1f}s"


def _render(rows: List[Dict[str, Any]], fmt: str, header: str) -> str:
    if fmt == "json":
        def clean(v):
            if isinstance(v, (float, np.floating)):
                v = float(v)
                return v if math.isfinite(v) else str(v)
            return v
        body = json.dumps([{k: clean(v) for k, v in r.items()} for r in rows], indent=1)
        return json.dumps({"header": header}) + "\n" + body + "\n"
    buf = io.StringIO()
    buf.write(header + "\n")
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0].keys()))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _spec_cols(spec: PreconditionerSpec) -> Dict[str, Any]:
    return {"i": spec.i, "j": spec.j, "mult": spec.mult, "omega": spec.omega,
            "omega1": spec.omega1, "omega2": spec.omega2}


def _eig_dump(reports) -> Dict[str, Any]:
    """Eigenvalues of every sampled frequency (orbits expanded)."""
    out = {}
    for rep in reports:
        plan = SamplingPlan(rep.n)
        nodes = plan.nodes
        freqs = {}
        lookup = {}
        for k, th in enumerate(rep.thetas):
            lookup[(round(th[0], 12), round(th[1], 12))] = k
        for (k1, k2), _ in (plan.orbits() if rep.folded else []):
            k = lookup[(round(nodes[k1], 12), round(nodes[k2], 12))]
            for a, b in plan.orbit_of(k1, k2):
                freqs[(a, b)] = k
        if not rep.folded:
            for k, th in enumerate(rep.thetas):
                freqs[(int(round((th[0] + math.pi) / plan.dtheta - 0.5)),
                       int(round((th[1] + math.pi) / plan.dtheta - 0.5)))] = k
        entry = {}
        for (a, b) in sorted(freqs, key=lambda t: (t[1], t[0])):
            ev = rep.eigenvalues[freqs[(a, b)]]
            key = f"{nodes[a]!r},{nodes[b]!r}"
            entry[key] = [[float(z.real), float(z.imag)] for z in ev]
        out[f"p={rep.p},n={rep.n},{rep.spec.label}"] = entry
    return out


# ------------------------------------------------------------------ commands
def cmd_sweep(cfg: RunConfig) -> int:
    rows, reports = [], []
    t0 = time.perf_counter()
    for p, n in itertools.product(cfg.p, cfg.n):
        specs = cfg.specs()
        for levels in (2, 3):
            group = [s for s in specs if s.levels == levels]
            if not group:
                continue
            reps = sweep_many(group, cfg.stencil_obj, p, SamplingPlan(n), method=cfg.method,
                              threads=cfg.threads)
            for rep in reps:
                log.info("p=%d n=%d %s -> %.6g (%.1fs)", p, n, rep.spec.label, rep.kappa, rep.runtime)
                rows.append({"p": p, "n": n, **_spec_cols(rep.spec), "mode": rep.mode,
                             "kappa": rep.kappa, "lam_min": rep.lam_min, "lam_max": rep.lam_max,
                             "abs_min": rep.abs_min, "abs_max": rep.abs_max,
                             "max_imag": rep.max_imag})
                reports.append(rep)
    header = _header_line(cfg, time.perf_counter() - t0)
    _emit(_render(rows, cfg.format, header), cfg.out)
    if cfg.eigs_out:
        Path(cfg.eigs_out).write_text(json.dumps(_eig_dump(reports)) + "\n")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    rows, curve = [], []
    t0 = time.perf_counter()
    two_d = cfg.grid2 is not None
    for p, n in itertools.product(cfg.p, cfg.n):
        for spec in cfg.specs():
            if two_d:
                grids = (cfg.grid or DEFAULT_GRID_2D[0], cfg.grid2)
                res = optimize_2d(spec, grids, cfg.stencil_obj, p, SamplingPlan(n), method=cfg.method)
            else:
                res = optimize_1d(spec, cfg.grid or SweepGrid(), cfg.stencil_obj, p, SamplingPlan(n),
                                  method=cfg.method)
            best = res.best_spec
            log.info("p=%d n=%d %s -> %.6g (%.1fs)", p, n, best.label, res.best_objective, res.runtime)
            rows.append({"p": p, "n": n, **_spec_cols(best), "tuned": "+".join(res.fields),
                         "objective": res.best_objective})
            if two_d:
                for w1, w2, obj, im in res.surface():
                    curve.append({"p": p, "n": n, "i": spec.i, "j": spec.j, "mult": spec.mult,
                                  res.fields[0]: w1, res.fields[1]: w2, "objective": obj,
                                  "max_imag": im})
            else:
                for (w, obj, im), lm in zip(res.curve(), res.lam_min):
                    curve.append({"p": p, "n": n, "i": spec.i, "j": spec.j, "mult": spec.mult,
                                  res.fields[0]: w, "objective": obj, "lam_min": lm,
                                  "max_imag": im})
    header = _header_line(cfg, time.perf_counter() - t0)
    _emit(_render(rows, cfg.format, header), cfg.out)
    curve_path = cfg.curve_out or (_sibling(cfg.out, "curve") if cfg.out else None)
    if curve_path:
        Path(curve_path).write_text(_render(curve, cfg.format, header))
    return EXIT_OK


def _sibling(path: str, tag: str) -> str:
    p = Path(path)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix or '.csv'}"))


def cmd_histogram(cfg: RunConfig) -> int:
    specs = cfg.specs()
    for spec in specs:
        if not spec.real_spectrum:
            raise ConfigError(f"mult: histograms need a real spectrum; {spec.label} is complex")
    rows = []
    t0 = time.perf_counter()
    for p, n in itertools.product(cfg.p, cfg.n):
        for levels in (2, 3):
            group = [s for s in specs if s.levels == levels]
            if not group:
                continue
            for rep in sweep_many(group, cfg.stencil_obj, p, SamplingPlan(n), method=cfg.method,
                                  threads=cfg.threads):
                h = histogram(rep, cfg.bin_width)
                for lo, hi, c, d in zip(h.edges[:-1], h.edges[1:], h.counts, h.densities):
                    rows.append({"p": p, "n": n, **_spec_cols(rep.spec), "bin_lo": round(lo, 12),
                                 "bin_hi": round(hi, 12), "count": int(c), "density": float(d)})
                log.info("p=%d n=%d %s: %d eigenvalues", p, n, rep.spec.label, h.total)
    header = _header_line(cfg, time.perf_counter() - t0)
    _emit(_render(rows, cfg.format, header), cfg.out)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    rows = []
    ok = True
    t0 = time.perf_counter()
    for p in cfg.p:
        sys_ = assemble(p, cfg.m)
        for spec in cfg.specs():
            if cfg.grid is not None:
                if spec.mult not in ("f",) or spec.j != 0:
                    raise ConfigError("grid: validate sweeps only two-level fine-wrapped specs")
                omegas = cfg.grid.values
                ext = finite_fine_wrap_curve(sys_, spec, omegas)
                for w, (lo, hi) in zip(omegas, ext):
                    kappa = hi / lo if lo > 0 else math.inf
                    rows.append({"p": p, "m": cfg.m, **_spec_cols(replace(spec, omega=float(w))),
                                 "lam_min": lo, "lam_max": hi, "kappa": kappa})
                continue
            rep = spectra_match(sys_, spec, lfa_p=p)
            row = {"p": p, "m": cfg.m, **_spec_cols(spec), "max_deviation": rep.max_deviation,
                   "kappa_finite": rep.kappa_finite, "kappa_lfa": rep.kappa_lfa}
            if cfg.ritz:
                est = ritz_estimate(sys_, spec, seed=cfg.seed)
                row["kappa_ritz"] = est.kappa
            row["agree"] = rep.max_deviation <= cfg.tol * max(1.0, float(np.abs(rep.lfa).max()))
            ok &= row["agree"]
            rows.append(row)
    header = _header_line(cfg, time.perf_counter() - t0)
    _emit(_render(rows, cfg.format, header), cfg.out)
    return EXIT_OK if ok else EXIT_NUMERIC


_DISPATCH = {"sweep": cmd_sweep, "optimize": cmd_optimize, "histogram": cmd_histogram,
             "validate": cmd_validate}


# ------------------------------------------------------------------ parsing
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bddc-lfa", description="Fourier analysis of BDDC preconditioners")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--stencil", help="'q1' or nine comma-separated coefficients, top row first")
        sp.add_argument("--p", help="subdomain width(s), comma-separated")
        sp.add_argument("--n", help="sampling half-resolution(s)")
        sp.add_argument("--i", help="fine variant(s) 1,2")
        sp.add_argument("--j", help="coarse variant(s) 0,1,2")
        sp.add_argument("--mult", choices=MULT_MODES)
        sp.add_argument("--omega", type=float)
        sp.add_argument("--omega1", type=float)
        sp.add_argument("--omega2", type=float)
        sp.add_argument("--grid", help="weight grid lo:hi[:step]")
        sp.add_argument("--grid2", help="second weight grid for two-dimensional searches")
        sp.add_argument("--m", type=int, help="subdomains per axis of the finite mesh")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output file (stdout if omitted)")
        sp.add_argument("--curve-out", dest="curve_out")
        sp.add_argument("--eigs-out", dest="eigs_out", help="JSON dump of all eigenvalues")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--threads", type=int)
        sp.add_argument("--method", choices=("auto", "general", "hermitian"))
        sp.add_argument("--bin-width", dest="bin_width", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--lfa-p", dest="lfa_p", type=int)
        sp.add_argument("--no-ritz", dest="ritz", action="store_const", const=False)
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_config(args: argparse.Namespace) -> RunConfig:
    data: Dict[str, Any] = {}
    if args.config:
        try:
            data = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"config: {exc}") from None
    if "command" in data and data["command"] != args.command:
        raise ConfigError(f"command: config says {data['command']!r} but {args.command!r} was requested")
    data["command"] = args.command
    for name in _KNOWN - {"command"}:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if isinstance(data.get("stencil"), str) and "," in data["stencil"]:
        data["stencil"] = [float(x) for x in data["stencil"].split(",")]
    return RunConfig(**data).validate()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(args)
        if cfg.threads is None:
            cfg.threads = default_threads()
        return _DISPATCH[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeshSizeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepError, OptimizationError, SingularMatrixError, EigenvalueConvergenceError,
            ArnoldiBreakdownError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
