"""Command-line front end.

Examples::

    cmcindex index --family clifford --n 2 --k 1 --r2 1/2 --engine closed
    cmcindex theorem --family sphere --n 2 --r 0.8
    cmcindex sweep --family clifford --n 2 --k 1 --r-min 0.3 --r-max 0.95 --steps 27 --format csv
    cmcindex verify --all

Reports go to stdout unless ``--output`` is given.  Exit codes: 0 success,
2 invalid input, 3 numerical non-convergence, 4 invariant violation.
Every error is also printed to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__, closed_spectrum, fem
from .errors import (CMCIndexError, ConvergenceError, InsufficientCountError, InvariantViolation,
                     ParameterError, UnsupportedFamilyError)
from .geometry import CLIFFORD, KINDS, SPHERE, AnalyticFamily, curvature_invariants, evaluate
from .index_engine import (ENGINES, EngineParams, builtin_families, compute_index, theorem_check,
                           verify)
from .quadrature import RULES, QuadratureSpec

COMMANDS = ("geometry", "spectrum", "index", "verify", "theorem", "sweep")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4


# -------------------------------------------------------------------------
# serialisation

def _fmt(obj) -> str:
    """JSON text with floats at 17 significant digits; non-finite floats become null."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = f"{x:.17g}"
        if not any(ch in text for ch in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return _fmt(obj) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def versions() -> dict:
    return {"cmcindex": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# -------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    command: str
    family: Optional[str] = None
    n: Optional[int] = None
    k: Optional[int] = None
    r: Optional[float] = None
    r2: Optional[str] = None
    orientation: int = 1
    engine: str = "closed"
    mesh: list = field(default_factory=lambda: [64, 64])
    quadrature: Optional[dict] = None
    cutoff: float = 1.0
    zero_tol: Optional[float] = None
    format: str = "json"
    output: Optional[str] = None
    plot: bool = False
    u: Optional[list] = None
    count: Optional[int] = None
    export_dir: Optional[str] = None
    all: bool = False
    r_min: Optional[float] = None
    r_max: Optional[float] = None
    steps: Optional[int] = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ParameterError(f"unknown command {self.command!r}")
        if self.engine not in ENGINES:
            raise ParameterError(f"engine must be one of {ENGINES}")
        if self.format not in ("json", "csv"):
            raise ParameterError("format must be json or csv")
        if self.format == "csv" and self.command != "sweep":
            raise ParameterError("csv output is only available for sweep")
        if self.plot and (self.command != "sweep" or not self.output):
            raise ParameterError("--plot needs the sweep command and an --output path")
        if not self.cutoff > 0:
            raise ParameterError("cutoff must be > 0")
        if self.zero_tol is not None and not self.zero_tol >= 0:
            raise ParameterError("zero-tol must be >= 0")
        if len(self.mesh) != 2 or min(self.mesh) < 4:
            raise ParameterError("mesh needs two sizes >= 4")
        if self.quadrature is not None:
            QuadratureSpec.from_dict(self.quadrature)
        if self.command == "verify" and self.all:
            return
        if self.family not in KINDS:
            raise ParameterError(f"--family must be one of {KINDS}")
        if self.n is None:
            raise ParameterError("--n is required")
        if self.command == "sweep":
            if self.family != CLIFFORD or self.k is None:
                raise ParameterError("sweep runs over Clifford tori and needs --k")
            if None in (self.r_min, self.r_max, self.steps):
                raise ParameterError("sweep needs --r-min, --r-max and --steps")
            if not 0 < self.r_min <= self.r_max < 1 or self.steps < 1:
                raise ParameterError("sweep needs 0 < r-min <= r-max < 1 and steps >= 1")
            return
        if self.r is not None and self.r2 is not None:
            raise ParameterError("give either --r or --r2, not both")
        if self.family == CLIFFORD and self.r is None and self.r2 is None:
            raise ParameterError("Clifford tori need --r or --r2")
        self.build_family()

    def build_family(self, r: Optional[float] = None) -> AnalyticFamily:
        k = self.k if self.family == CLIFFORD else None
        if self.family == SPHERE and self.k is not None:
            raise ParameterError("--k only applies to Clifford tori")
        if r is not None:
            return AnalyticFamily(self.family, self.n, float(r), k, self.orientation)
        if self.r2 is not None:
            return AnalyticFamily.from_r2(self.family, self.n, _parse_rational(self.r2), k,
                                          self.orientation)
        radius = 1.0 if self.r is None else self.r
        return AnalyticFamily(self.family, self.n, float(radius), k, self.orientation)

    def quad(self, family: AnalyticFamily) -> QuadratureSpec:
        if self.quadrature is None:
            return QuadratureSpec.for_dimension(family.n)
        return QuadratureSpec.from_dict(self.quadrature)

    def engine_params(self) -> EngineParams:
        return EngineParams(self.cutoff, self.zero_tol, tuple(self.mesh))

    def to_dict(self) -> dict:
        return {key: val for key, val in asdict(self).items() if val is not None}


def _parse_rational(text: str):
    from fractions import Fraction
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParameterError(f"cannot parse r^2 {text!r} as a rational") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmcindex", description="Morse index of CMC hypersurfaces in spheres")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        p.add_argument("--family", choices=KINDS)
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--r", type=float)
        p.add_argument("--r2", help="exact r^2 as p/q (enables exact zero-mode detection)")
        p.add_argument("--orientation", type=int, choices=(1, -1))
        p.add_argument("--engine", choices=ENGINES)
        p.add_argument("--mesh", type=int, nargs=2, metavar=("M1", "M2"))
        p.add_argument("--quad-points", type=int)
        p.add_argument("--quad-rule", choices=RULES)
        p.add_argument("--cutoff", type=float)
        p.add_argument("--zero-tol", type=float)
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--output", "-o")
        if name == "geometry":
            p.add_argument("--u", type=float, nargs="+", help="chart point")
        if name == "spectrum":
            p.add_argument("--count", type=int, help="FEM eigenvalues to compute")
            p.add_argument("--export-dir", help="write K, M, V in coordinate format")
        if name == "verify":
            p.add_argument("--all", action="store_true", help="run every built-in family")
        if name == "sweep":
            p.add_argument("--r-min", type=float)
            p.add_argument("--r-max", type=float)
            p.add_argument("--steps", type=int)
            p.add_argument("--plot", action="store_true", help="also write <output>.svg")
    return parser


def parse_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc}") from exc
        values.pop("command", None)
    flags = vars(args)
    quad = dict(values.get("quadrature") or {})
    if flags.pop("quad_points", None) is not None:
        quad["pointsPerDim"] = args.quad_points
    if flags.pop("quad_rule", None) is not None:
        quad["rule"] = args.quad_rule
    if quad:
        values["quadrature"] = quad
    for key, val in flags.items():
        if key in ("config", "command") or val is None or val is False:
            continue
        values[key] = val
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ParameterError(f"unknown config keys {sorted(unknown)}")
    cfg = RunConfig(command=args.command, **values)
    cfg.validate()
    return cfg


# -------------------------------------------------------------------------
# commands

def _threads() -> int:
    raw = os.environ.get("CMCINDEX_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ParameterError(f"CMCINDEX_THREADS must be an integer, got {raw!r}") from exc


def _default_u(family: AnalyticFamily) -> np.ndarray:
    u = np.full(family.n, 1.0)
    for ax in family.periodic_axes:
        u[ax] = 0.7
    return u


def cmd_geometry(cfg: RunConfig):
    family = cfg.build_family()
    u = np.asarray(cfg.u, dtype=float) if cfg.u is not None else _default_u(family)
    data = evaluate(family, u)
    inv = curvature_invariants(family)
    x, nu, g, A = data.position[0], data.normal[0], data.metric[0], data.shape[0]
    ga = g @ A
    result = {
        "family": family.label,
        "orientation": family.orientation,
        "u": u,
        "position": x,
        "normal": nu,
        "metric": g,
        "shape": A,
        "principalCurvatures": family.principal_curvatures(),
        "H": inv.mean_curvature,
        "absH": inv.abs_h,
        "normA2": inv.norm_a2,
        "normPhi2": inv.norm_phi2,
        "hypothesisGap": inv.hypothesis_gap,
        "area": family.area(),
    }
    residuals = {
        "positionNorm": abs(float(np.linalg.norm(x)) - 1.0),
        "normalNorm": abs(float(np.linalg.norm(nu)) - 1.0),
        "normalDotPosition": abs(float(nu @ x)),
        "shapeSelfAdjoint": float(np.abs(ga - ga.T).max()),
        "meanCurvature": abs(float(data.mean_curvature[0]) - inv.mean_curvature),
    }
    return result, residuals, EXIT_OK


def _mode_dict(mode) -> dict:
    return {"label": list(mode.label), "eigenvalue": float(mode.eigenvalue),
            "multiplicity": mode.multiplicity}


def cmd_spectrum(cfg: RunConfig):
    family = cfg.build_family()
    tol = cfg.engine_params().tol_for(cfg.engine)
    if cfg.engine == "closed":
        spec = closed_spectrum.stability_modes(family, cfg.cutoff)
        count = closed_spectrum.index_count(spec, tol)
        result = {"family": family.label, "engine": "closed", "exact": spec.exact,
                  "potential": float(spec.potential), "cutoff": spec.cutoff,
                  "modes": [_mode_dict(m) for m in spec.modes], **count.to_dict()}
        return result, {}, EXIT_OK
    pencil = fem.assemble(family, fem.build_mesh(*cfg.mesh))
    if cfg.export_dir:
        out = Path(cfg.export_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in ("K", "M", "V"):
            fem.write_coordinate(getattr(pencil, name), out / f"{name}.txt")
    if cfg.count is not None:
        spec = fem.eigen_solve(pencil, cfg.count)
    else:
        spec = fem.solve_until_complete(pencil, tol)
    result = {"family": family.label, "engine": "fem", "mesh": list(cfg.mesh),
              "eigenvalues": spec.eigenvalues}
    try:
        strong, zero = fem.negative_count(spec, tol)
        result.update(strong=strong, weak=fem.weak_negative_count(pencil, spec, tol),
                      zeroModes=zero)
    except InsufficientCountError:
        result["complete"] = False
    area = float(pencil.M.sum())
    residuals = {"maxEigenResidual": spec.max_residual,
                 "massAreaRelative": abs(area - family.area()) / family.area()}
    return result, residuals, EXIT_OK


def cmd_index(cfg: RunConfig):
    family = cfg.build_family()
    count = compute_index(family, cfg.engine, cfg.engine_params())
    result = {"family": family.label, "engine": cfg.engine, **count.to_dict(),
              "zeroTol": count.zero_tol}
    return result, {}, EXIT_OK


def cmd_verify(cfg: RunConfig):
    families = builtin_families() if cfg.all else [cfg.build_family()]
    results, residuals, ok = [], {}, True
    for family in families:
        report = verify(family, cfg.quad(family) if cfg.quadrature else None)
        ok &= report.passed
        results.append({"family": family.label, "pass": report.passed,
                        "checks": {k: dict(v) for k, v in report.checks.items()}})
        residuals[family.label] = {k: v["value"] for k, v in report.checks.items()
                                   if k not in ("corollary", "lemmaRank")}
    return {"pass": ok, "families": results}, residuals, EXIT_OK if ok else EXIT_INVARIANT


def cmd_theorem(cfg: RunConfig):
    family = cfg.build_family()
    quad = cfg.quad(family) if cfg.quadrature else None
    report = theorem_check(family, cfg.engine, quad, cfg.engine_params())
    residuals = {"proofStepViolation": report.proof_step_violation}
    return report.to_dict(), residuals, EXIT_OK if report.consistent else EXIT_INVARIANT


SWEEP_COLUMNS = ("r", "strong", "weak", "zeroModes", "absH", "hypothesisGap")


def sweep_rows(cfg: RunConfig) -> list[dict]:
    grid = np.linspace(cfg.r_min, cfg.r_max, cfg.steps)
    params = cfg.engine_params()

    def row(r):
        family = cfg.build_family(r)
        count = compute_index(family, cfg.engine, params)
        inv = curvature_invariants(family)
        return {"r": float(r), "strong": count.strong, "weak": count.weak,
                "zeroModes": count.zero_modes, "absH": inv.abs_h,
                "hypothesisGap": inv.hypothesis_gap}

    workers = min(_threads(), len(grid))
    if workers <= 1:
        return [row(r) for r in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(row, grid))


def _sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def write_sweep_plot(rows, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "cmcindex"
    r = [row["r"] for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(r, [row["weak"] for row in rows], where="mid", label="weak index")
    ax.set_xlabel("r")
    ax.set_ylabel("weak index")
    ax2 = ax.twinx()
    ax2.plot(r, [row["absH"] for row in rows], color="tab:orange", label="|H|")
    ax2.set_ylabel("|H|")
    fig.legend(loc="upper center", ncol=2)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _write_atomic(path, buf.getvalue())


def cmd_sweep(cfg: RunConfig):
    rows = sweep_rows(cfg)
    return {"columns": list(SWEEP_COLUMNS), "rows": rows}, {}, EXIT_OK


HANDLERS = {"geometry": cmd_geometry, "spectrum": cmd_spectrum, "index": cmd_index,
            "verify": cmd_verify, "theorem": cmd_theorem, "sweep": cmd_sweep}


def _emit_error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exitCode": code}
    best = getattr(exc, "best_residual", None)
    if best is not None:
        payload["bestResidual"] = best
    sys.stderr.write(dumps(payload))
    return code


def run(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        result, residuals, code = HANDLERS[cfg.command](cfg)
        if cfg.format == "csv":
            text = _sweep_csv(result["rows"])
        else:
            text = dumps({"config": cfg.to_dict(), "result": result, "residuals": residuals,
                          "versions": versions()})
        if cfg.output:
            _write_atomic(Path(cfg.output), text)
            if cfg.plot:
                write_sweep_plot(result["rows"], Path(cfg.output).with_suffix(".svg"))
        else:
            sys.stdout.write(text)
        if code == EXIT_INVARIANT:
            return _emit_error(InvariantViolation(f"{cfg.command}: invariant check failed"), code)
        return code
    except (ParameterError, UnsupportedFamilyError) as exc:
        return _emit_error(exc, EXIT_INVALID)
    except (ConvergenceError, InsufficientCountError) as exc:
        return _emit_error(exc, EXIT_NUMERIC)
    except InvariantViolation as exc:
        return _emit_error(exc, EXIT_INVARIANT)
    except CMCIndexError as exc:
        return _emit_error(exc, EXIT_INVALID)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
