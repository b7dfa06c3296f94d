"""Command line driver: configs in, deterministic reports out.

Selection experiments are described by a TOML config with sections
[model], [numeric], [experiment] and [output].  Parsing is strict: an
unknown section or key fails with the dotted path, a value outside the
admissible range fails with RangeError, and every default is
materialized into the emitted manifest so that rerunning the manifest
reproduces the report byte for byte.  Floats are written with 17
significant digits, wall-clock times never reach the files, and the
exit code is 0 for a confirmed or inconclusive verdict, 1 for a
refuted one, 2 for any error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:                       # 3.10: same parser, old name
    import tomli as tomllib

import numpy as np
import scipy

from . import __version__
from .barrier import compute_separatrix, peierls_numeric
from .effective import scheme_residual, solve_periodic
from .experiment import (_barrier_gap, compare_viscosity, lambda_sweep,
                         run_hyperbolic_ladder)
from .grid import MeshSpec
from .model import PRESETS, make_model
from .orbits import (find_orbits, lambda_crossing, orbit_report,
                     predict_selection, selection_integrals)
from .walk import Cone, ControlField, compensated_statistics

_ENV_WORKER_CAP = "HJSELECT_MAX_WORKERS"


class SchemaError(ValueError):
    """Config rejected: unknown key, wrong type, or missing requirement."""

    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}")


class RangeError(ValueError):
    """Config value outside the range the experiment is defined on."""

    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}")


# ---------------------------------------------------------------------
# config schema


@dataclass(frozen=True)
class RunConfig:
    """A fully validated experiment description, defaults included."""

    family: str
    kind: str                        # "run", "sweep" or "compare"
    c: float
    depth: float | None = None       # two_well override
    split: float | None = None       # two_well override
    eps: float | None = None         # forced_two_well override
    lam: float | None = None
    lam_grid: tuple | None = None
    nu_ladder: tuple | None = None
    n_ladder: tuple = (32, 64, 128, 256)
    n_diffusive: int = 256
    delta: float = 0.1
    lam_bounds: tuple = (0.015625, 1.0)
    max_periods: int = 4000
    t_max_barrier: int = 200
    n_vel: int = 129
    seed: str = "winner"
    compute_barrier: bool = True
    workers: int = 1
    out_dir: str = "out"


_SECTIONS = ("model", "numeric", "experiment", "output")
_KEYS = {
    "model": ("family", "depth", "split", "eps"),
    "numeric": ("c", "lam", "lam_grid", "nu_ladder", "n_ladder",
                "n_diffusive", "delta", "lam_bounds", "max_periods",
                "t_max_barrier", "n_vel", "seed", "workers"),
    "experiment": ("kind", "compute_barrier"),
    "output": ("dir",),
}
_KIND_DEFAULTS = {
    "run": {"n_ladder": (32, 64, 128, 256), "delta": 0.1, "max_periods": 4000},
    "sweep": {"n_ladder": (48, 96), "delta": 0.1, "max_periods": 4000},
    "compare": {"n_ladder": (96, 192), "delta": 0.15, "max_periods": 1200},
}
# keys an experiment kind has no use for; present means a config typo
_FORBIDDEN = {
    "run": ("lam_grid", "nu_ladder", "n_diffusive"),
    "sweep": ("lam", "nu_ladder", "n_diffusive", "t_max_barrier", "n_vel",
              "compute_barrier"),
    "compare": ("lam_grid", "t_max_barrier", "n_vel", "compute_barrier"),
}


def _as_float(path: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {v!r}")
    return float(v)


def _as_int(path: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, f"expected an integer, got {v!r}")
    return v


def _as_str(path: str, v) -> str:
    if not isinstance(v, str):
        raise SchemaError(path, f"expected a string, got {v!r}")
    return v


def _as_bool(path: str, v) -> bool:
    if not isinstance(v, bool):
        raise SchemaError(path, f"expected true or false, got {v!r}")
    return v


def _as_float_seq(path: str, v, min_len: int = 1) -> tuple:
    if not isinstance(v, list) or len(v) < min_len:
        raise SchemaError(path, f"expected a list of at least {min_len} numbers")
    return tuple(_as_float(f"{path}[{i}]", x) for i, x in enumerate(v))


def _as_int_seq(path: str, v, min_len: int = 1) -> tuple:
    if not isinstance(v, list) or len(v) < min_len:
        raise SchemaError(path, f"expected a list of at least {min_len} integers")
    return tuple(_as_int(f"{path}[{i}]", x) for i, x in enumerate(v))


def parse_config(text: str) -> RunConfig:
    """Validate a TOML experiment description into a RunConfig.

    Unknown sections or keys, type mismatches and missing requirements
    raise SchemaError with the dotted key path; admissible-range
    violations raise RangeError.  A [versions] section is tolerated and
    ignored so that emitted manifests parse back unchanged.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError("config", f"not valid TOML: {exc}") from exc

    for section in data:
        if section not in _SECTIONS and section != "versions":
            raise SchemaError(section, "unknown section")
    for section in ("model", "numeric", "experiment"):
        if section not in data:
            raise SchemaError(section, "required section is missing")
    for section, keys in _KEYS.items():
        for key in data.get(section, {}):
            if key not in keys:
                raise SchemaError(f"{section}.{key}", "unknown key")

    mod, num, exp = data["model"], data["numeric"], data["experiment"]
    out = data.get("output", {})

    if "kind" not in exp:
        raise SchemaError("experiment.kind", "required key is missing")
    kind = _as_str("experiment.kind", exp["kind"])
    if kind not in _KIND_DEFAULTS:
        raise SchemaError("experiment.kind",
                          f"expected one of {sorted(_KIND_DEFAULTS)}, got {kind!r}")
    for key in _FORBIDDEN[kind]:
        # the forbidden key may live in either section; report the right path
        if key in num:
            raise SchemaError(f"numeric.{key}",
                              f"not used when experiment.kind = {kind!r}")
        if key in exp:
            raise SchemaError(f"experiment.{key}",
                              f"not used when experiment.kind = {kind!r}")

    if "family" not in mod:
        raise SchemaError("model.family", "required key is missing")
    family = _as_str("model.family", mod["family"])
    if family not in PRESETS:
        raise SchemaError("model.family",
                          f"expected one of {sorted(PRESETS)}, got {family!r}")
    depth = _as_float("model.depth", mod["depth"]) if "depth" in mod else None
    split = _as_float("model.split", mod["split"]) if "split" in mod else None
    eps = _as_float("model.eps", mod["eps"]) if "eps" in mod else None
    if (depth is not None or split is not None) and family != "two_well":
        raise SchemaError("model.depth" if depth is not None else "model.split",
                          "only meaningful for family 'two_well'")
    if eps is not None and family != "forced_two_well":
        raise SchemaError("model.eps",
                          "only meaningful for family 'forced_two_well'")

    if "c" not in num:
        raise SchemaError("numeric.c", "required key is missing")
    c = _as_float("numeric.c", num["c"])
    if not math.isfinite(c):
        raise RangeError("numeric.c", "must be finite")

    defaults = _KIND_DEFAULTS[kind]
    lam_bounds = _as_float_seq("numeric.lam_bounds", num["lam_bounds"], 2) \
        if "lam_bounds" in num else (0.015625, 1.0)
    if len(lam_bounds) != 2 or not 0.0 < lam_bounds[0] < lam_bounds[1] <= 1.0:
        raise RangeError("numeric.lam_bounds",
                         f"expected 0 < lo < hi <= 1, got {list(lam_bounds)}")

    def check_lam(path: str, value: float) -> float:
        if not lam_bounds[0] <= value < lam_bounds[1]:
            raise RangeError(path, f"{value!r} outside [{lam_bounds[0]!r}, "
                                   f"{lam_bounds[1]!r})")
        return value

    lam = None
    if "lam" in num:
        lam = check_lam("numeric.lam", _as_float("numeric.lam", num["lam"]))
    lam_grid = None
    if "lam_grid" in num:
        lam_grid = _as_float_seq("numeric.lam_grid", num["lam_grid"], 2)
        for i, x in enumerate(lam_grid):
            check_lam(f"numeric.lam_grid[{i}]", x)
        if any(b <= a for a, b in zip(lam_grid, lam_grid[1:])):
            raise SchemaError("numeric.lam_grid", "must be strictly increasing")
    nu_ladder = None
    if "nu_ladder" in num:
        nu_ladder = _as_float_seq("numeric.nu_ladder", num["nu_ladder"], 1)
        for i, v in enumerate(nu_ladder):
            if not v > 0.0:
                raise RangeError(f"numeric.nu_ladder[{i}]",
                                 f"viscosity must be positive, got {v!r}")
    if kind == "run" and lam is None:
        raise SchemaError("numeric.lam", "required when experiment.kind = 'run'")
    if kind == "sweep" and lam_grid is None:
        raise SchemaError("numeric.lam_grid",
                          "required when experiment.kind = 'sweep'")
    if kind == "compare" and nu_ladder is None:
        raise SchemaError("numeric.nu_ladder",
                          "required when experiment.kind = 'compare'")

    n_ladder = _as_int_seq("numeric.n_ladder", num["n_ladder"], 1) \
        if "n_ladder" in num else defaults["n_ladder"]
    for i, n in enumerate(n_ladder):
        if n < 8:
            raise RangeError(f"numeric.n_ladder[{i}]", f"need N >= 8, got {n}")
    if any(b <= a for a, b in zip(n_ladder, n_ladder[1:])):
        raise SchemaError("numeric.n_ladder", "must be strictly increasing")
    n_diffusive = _as_int("numeric.n_diffusive", num["n_diffusive"]) \
        if "n_diffusive" in num else 256
    if n_diffusive < 8:
        raise RangeError("numeric.n_diffusive", f"need N >= 8, got {n_diffusive}")

    delta = _as_float("numeric.delta", num["delta"]) \
        if "delta" in num else defaults["delta"]
    if not 0.0 < delta < 0.5:
        raise RangeError("numeric.delta",
                         f"window half-width must lie in (0, 0.5), got {delta!r}")
    max_periods = _as_int("numeric.max_periods", num["max_periods"]) \
        if "max_periods" in num else defaults["max_periods"]
    if max_periods < 1:
        raise RangeError("numeric.max_periods", "must be at least 1")
    t_max_barrier = _as_int("numeric.t_max_barrier", num["t_max_barrier"]) \
        if "t_max_barrier" in num else 200
    if t_max_barrier < 1:
        raise RangeError("numeric.t_max_barrier", "must be at least 1")
    n_vel = _as_int("numeric.n_vel", num["n_vel"]) if "n_vel" in num else 129
    if n_vel < 3:
        raise RangeError("numeric.n_vel", "need at least 3 velocity nodes")
    seed = _as_str("numeric.seed", num["seed"]) if "seed" in num else "winner"
    if seed not in ("winner", "zero"):
        raise SchemaError("numeric.seed",
                          f"expected 'winner' or 'zero', got {seed!r}")
    workers = _as_int("numeric.workers", num["workers"]) \
        if "workers" in num else 1
    if workers < 1:
        raise RangeError("numeric.workers", "must be at least 1")
    compute_barrier = _as_bool("experiment.compute_barrier",
                               exp["compute_barrier"]) \
        if "compute_barrier" in exp else True
    out_dir = _as_str("output.dir", out["dir"]) if "dir" in out else "out"

    return RunConfig(family=family, kind=kind, c=c, depth=depth, split=split,
                     eps=eps, lam=lam, lam_grid=lam_grid, nu_ladder=nu_ladder,
                     n_ladder=n_ladder, n_diffusive=n_diffusive, delta=delta,
                     lam_bounds=tuple(lam_bounds), max_periods=max_periods,
                     t_max_barrier=t_max_barrier, n_vel=n_vel, seed=seed,
                     compute_barrier=compute_barrier, workers=workers,
                     out_dir=out_dir)


def build_model(config: RunConfig):
    overrides = {}
    if config.depth is not None:
        overrides["depth"] = config.depth
    if config.split is not None:
        overrides["split"] = config.split
    if config.eps is not None:
        overrides["eps"] = config.eps
    return make_model(config.family, **overrides)


def capped_workers(requested: int) -> int:
    """Honor the environment cap on worker threads, if set."""
    raw = os.environ.get(_ENV_WORKER_CAP, "").strip()
    if not raw:
        return max(1, requested)
    try:
        cap = int(raw)
    except ValueError:
        raise SchemaError(f"env.{_ENV_WORKER_CAP}",
                          f"expected an integer, got {raw!r}") from None
    return max(1, min(requested, cap))


# ---------------------------------------------------------------------
# deterministic emission


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_value(obj) -> str:
    if isinstance(obj, np.generic):
        obj = obj.item()
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return _fmt(obj)
        return f'"{_fmt(obj)}"'
    if isinstance(obj, complex):
        return f'"{_fmt(obj.real)}{"+" if obj.imag >= 0 else ""}{_fmt(obj.imag)}j"'
    if isinstance(obj, str):
        body = obj.replace("\\", "\\\\").replace('"', '\\"')
        body = "".join(c if ord(c) >= 0x20 else f"\\u{ord(c):04x}" for c in body)
        return f'"{body}"'
    if isinstance(obj, dict):
        items = ", ".join(f"{_json_value(str(k))}: {_json_value(v)}"
                          for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_text(obj, indent: int = 0) -> str:
    """Pretty JSON with stable key order and 17-digit floats.

    Dict and list nodes above the leaf level get one line per item; the
    leaves fall through to the compact writer.
    """
    pad, pad1 = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict) and obj and any(
            isinstance(v, (dict, list, tuple)) for v in obj.values()):
        lines = [f"{pad1}{_json_value(str(k))}: {_json_text(v, indent + 1).lstrip()}"
                 for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(lines) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)) and obj and all(
            isinstance(v, dict) for v in obj):
        lines = [_json_text(v, indent + 1) for v in obj]
        return pad + "[\n" + ",\n".join(lines) + "\n" + pad + "]"
    return pad + _json_value(obj)


def _cell(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _fmt(v)
    if isinstance(v, complex):
        return f"{_fmt(v.real)}{'+' if v.imag >= 0 else ''}{_fmt(v.imag)}j"
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _write_csv(path: Path, rows: list) -> None:
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in cols])


def _write_dat(path: Path, rows: list) -> None:
    """Gnuplot-ready whitespace table of the numeric columns."""
    def numeric(col):
        return all(row.get(col) is None
                   or isinstance(row.get(col), (int, float, np.generic))
                   and not isinstance(row.get(col), bool) for row in rows)

    cols = [c for c in (rows[0] if rows else []) if numeric(c)]
    lines = ["# " + " ".join(cols)]
    for row in rows:
        parts = []
        for col in cols:
            v = row.get(col)
            v = v.item() if isinstance(v, np.generic) else v
            parts.append("nan" if v is None
                         else _fmt(v) if isinstance(v, float) else str(v))
        lines.append(" ".join(parts))
    path.write_text("\n".join(lines) + "\n")


def _toml_scalar(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)                          # shortest exact round trip
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to a manifest")


def _versions() -> dict:
    return {"package": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def config_manifest(config: RunConfig) -> str:
    """The config with every default materialized, as TOML text.

    parse_config accepts the result and reproduces the same RunConfig,
    which is what makes reruns reproducible.
    """
    sections = [("model", [("family", config.family), ("depth", config.depth),
                           ("split", config.split), ("eps", config.eps)]),
                ("numeric", [("c", config.c), ("lam", config.lam),
                             ("lam_grid", config.lam_grid),
                             ("nu_ladder", config.nu_ladder),
                             ("n_ladder", config.n_ladder),
                             ("n_diffusive", config.n_diffusive),
                             ("delta", config.delta),
                             ("lam_bounds", config.lam_bounds),
                             ("max_periods", config.max_periods),
                             ("t_max_barrier", config.t_max_barrier),
                             ("n_vel", config.n_vel), ("seed", config.seed),
                             ("workers", config.workers)]),
                ("experiment", [("kind", config.kind),
                                ("compute_barrier", config.compute_barrier)]),
                ("output", [("dir", config.out_dir)])]
    forbidden = _FORBIDDEN[config.kind]
    lines = []
    for name, pairs in sections:
        lines.append(f"[{name}]")
        for key, value in pairs:
            if value is None or key in forbidden:
                continue
            lines.append(f"{key} = {_toml_scalar(value)}")
        lines.append("")
    lines.append("[versions]")
    for key, value in _versions().items():
        lines.append(f"{key} = {_toml_scalar(value)}")
    return "\n".join(lines) + "\n"


def args_manifest(command: str, pairs: list) -> str:
    """Manifest for the table subcommands: the invocation, then versions."""
    lines = ["[command]", f"name = {_toml_scalar(command)}", "", "[args]"]
    for key, value in pairs:
        if value is not None:
            lines.append(f"{key} = {_toml_scalar(value)}")
    lines.append("")
    lines.append("[versions]")
    for key, value in _versions().items():
        lines.append(f"{key} = {_toml_scalar(value)}")
    return "\n".join(lines) + "\n"


def emit_report(out_dir, payload: dict, rows: list, manifest: str) -> dict:
    """Write report.json / report.csv / report.dat / manifest.toml."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "report.json", "csv": out / "report.csv",
             "dat": out / "report.dat", "manifest": out / "manifest.toml"}
    paths["json"].write_text(_json_text(payload) + "\n")
    _write_csv(paths["csv"], rows)
    _write_dat(paths["dat"], rows)
    paths["manifest"].write_text(manifest)
    return paths


# ---------------------------------------------------------------------
# subcommands


def _config_dict(config: RunConfig) -> dict:
    # workers and out_dir stay out: they steer execution, not results,
    # and the report bytes must not depend on thread count
    d = {"family": config.family, "kind": config.kind, "c": config.c}
    for key in ("depth", "split", "eps", "lam", "lam_grid", "nu_ladder"):
        value = getattr(config, key)
        if value is not None:
            d[key] = list(value) if isinstance(value, tuple) else value
    d.update(n_ladder=list(config.n_ladder), n_diffusive=config.n_diffusive,
             delta=config.delta, lam_bounds=list(config.lam_bounds),
             max_periods=config.max_periods,
             t_max_barrier=config.t_max_barrier, n_vel=config.n_vel,
             seed=config.seed, compute_barrier=config.compute_barrier)
    return d


def _cmd_select(args) -> int:
    text = Path(args.config).read_text()
    config = parse_config(text)
    if config.kind != args.mode:
        raise SchemaError("experiment.kind",
                          f"config says {config.kind!r} but the command is "
                          f"'select {args.mode}'")
    model = build_model(config)
    workers = capped_workers(config.workers)

    if config.kind == "run":
        report = run_hyperbolic_ladder(
            model, config.c, config.lam, config.n_ladder, delta=config.delta,
            compute_barrier=config.compute_barrier, seed=config.seed,
            max_periods=config.max_periods, t_max_barrier=config.t_max_barrier,
            n_vel=config.n_vel, workers=workers)
        rows = [e.as_dict() for e in report.entries]
    elif config.kind == "sweep":
        report = lambda_sweep(
            model, config.c, list(config.lam_grid), n_ladder=config.n_ladder,
            delta=config.delta, max_periods=config.max_periods,
            seed=config.seed, workers=workers)
        rows = report.extra["rows"]
    else:
        side = None
        if config.lam is not None:
            side = run_hyperbolic_ladder(
                model, config.c, config.lam, config.n_ladder,
                delta=config.delta, compute_barrier=False, seed=config.seed,
                max_periods=config.max_periods, workers=workers)
        report = compare_viscosity(
            model, config.c, nu_ladder=config.nu_ladder, N=config.n_diffusive,
            delta=config.delta, max_periods=config.max_periods,
            hyperbolic=side, seed=config.seed, workers=workers)
        rows = [e.as_dict() for e in report.entries]

    payload = {"command": f"select {config.kind}",
               "config": _config_dict(config), "report": report.as_dict()}
    out_dir = args.out if args.out else config.out_dir
    paths = emit_report(out_dir, payload, rows, config_manifest(config))

    for entry in report.entries:
        state = entry.cause if entry.cause else (
            f"h={_short(entry.h_delta)} detected={list(entry.detected)}"
            + (f" ambiguous={list(entry.ambiguous)}" if entry.ambiguous else "")
            + (f" barrier_sup={_short(entry.barrier_sup)}"
               if entry.barrier_sup is not None else ""))
        print(f"  N={entry.N:4d} K={entry.K:5d} lam={_short(entry.lam)} {state}")
    print(f"verdict: {report.verdict}"
          + (f" ({report.cause})" if report.cause else ""))
    print(f"report: {paths['json']}")
    return 1 if report.verdict == "refuted" else 0


def _short(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) \
        else format(float(x), ".6g")


def _cmd_effective(args) -> int:
    model = make_model(args.model)
    rows = []
    for c in args.c or [0.0]:
        for N in args.n or [32]:
            mesh = MeshSpec(N, max(N, round(N / args.lam)))
            sol = solve_periodic(model, mesh, c, max_periods=args.max_periods)
            rows.append({"model": model.name, "c": c, "N": mesh.N,
                         "K": mesh.K, "lam": mesh.lam, "h_delta": sol.h_delta,
                         "periods": sol.iterations_used,
                         "defect": sol.residual_periodicity,
                         "residual": scheme_residual(model, sol)})
            r = rows[-1]
            print(f"  c={_short(c)} N={N:4d} h_delta={_fmt(sol.h_delta)} "
                  f"periods={r['periods']} defect={_short(r['defect'])}")
    if args.out:
        payload = {"command": "effective", "rows": rows}
        manifest = args_manifest("effective", [
            ("model", args.model), ("c", list(args.c or [0.0])),
            ("n", list(args.n or [32])), ("lam", args.lam),
            ("max_periods", args.max_periods)])
        paths = emit_report(args.out, payload, rows, manifest)
        print(f"report: {paths['json']}")
    return 0


def _cmd_walk_stats(args) -> int:
    mesh = MeshSpec(args.n, max(args.n, round(args.n / args.lam)))
    cone = Cone(mesh, origin_m=1, k_top=0, depth=args.depth)
    xi = ControlField.constant(cone, args.xi)
    dist = compensated_statistics(cone, xi, mc_samples=args.mc, seed=args.seed)
    bound = dist.sigma_tilde_bound()
    rows = []
    for r in range(cone.depth + 1):
        rows.append({"level": r, "duration": cone.duration(r),
                     "gamma_bar": float(dist.gamma_bar[r]),
                     "sigma": float(dist.sigma[r]),
                     "sigma_tilde": float(dist.sigma_tilde[r]),
                     "d_tilde": float(dist.d_tilde[r]),
                     "gap_bound": float(bound[r])})
    print(f"walk on N={args.n} lam={_short(mesh.lam)} xi={_short(args.xi)} "
          f"depth={args.depth}")
    for r in rows[-3:]:
        print(f"  level={r['level']:3d} gamma_bar={_short(r['gamma_bar'])} "
              f"sigma={_short(r['sigma'])} "
              f"sigma_tilde={_short(r['sigma_tilde'])} "
              f"bound={_short(r['gap_bound'])}")
    if args.out:
        payload = {"command": "walk-stats", "meta": dict(sorted(
            (k, v) for k, v in dist.meta.items()
            if isinstance(v, (int, float, str, bool)))), "rows": rows}
        manifest = args_manifest("walk-stats", [
            ("n", args.n), ("lam", args.lam), ("xi", args.xi),
            ("depth", args.depth), ("mc", args.mc), ("seed", args.seed)])
        paths = emit_report(args.out, payload, rows, manifest)
        print(f"report: {paths['json']}")
    return 0


def _cmd_orbits(args) -> int:
    model = make_model(args.model)
    orbits = find_orbits(model, q=args.q)
    if not orbits:
        print(f"no hyperbolic minimizing orbits found for {model.name}")
        return 0
    integrals = [selection_integrals(o, model) for o in orbits]
    lam_grid = args.lam or [0.125, 0.25, 0.5, 0.75]
    rows = [s.as_dict(lam_grid) for s in integrals]
    print(orbit_report(integrals, lam_grid))
    crossings = []
    for i in range(len(integrals)):
        for j in range(i + 1, len(integrals)):
            lam_c = lambda_crossing(integrals[i], integrals[j])
            if lam_c is not None:
                crossings.append({"first": i, "second": j, "lam": lam_c})
                print(f"  rank flip between orbits {i} and {j} at "
                      f"lam={_short(lam_c)}")
    if args.out:
        payload = {"command": "orbits", "model": model.name,
                   "crossings": crossings, "rows": rows}
        manifest = args_manifest("orbits", [
            ("model", args.model), ("q", args.q), ("lam", list(lam_grid))])
        paths = emit_report(args.out, payload, rows, manifest)
        print(f"report: {paths['json']}")
    return 0


def _cmd_peierls(args) -> int:
    model = make_model(args.model)
    mesh = MeshSpec(args.n, max(args.n, round(args.n / args.lam)))
    sol = solve_periodic(model, mesh, args.c, max_periods=args.max_periods)
    x0 = args.x0
    if x0 is None:
        orbits = find_orbits(model)
        if not orbits:
            raise ValueError(f"{model.name} has no hyperbolic orbits; "
                             "pass --x0 for the barrier base point")
        integrals = [selection_integrals(o, model) for o in orbits]
        pred = predict_selection(integrals, mesh.lam)
        x0 = orbits[pred.winner].x0 % 1.0
    bf = peierls_numeric(model, mesh, args.c, x0, h=sol.h_delta,
                         T_max=args.t_max, n_vel=args.n_vel)
    gap = _barrier_gap(sol, model, x0, args.t_max, args.n_vel)
    positions = bf.positions(0)
    base = bf.rows[0, bf.base_index]
    rows = [{"x": float(positions[m]), "barrier": float(bf.rows[0, m] - base)}
            for m in range(bf.rows.shape[1])]
    print(f"barrier from x0={_short(x0)} on N={args.n}: "
          f"periods={bf.periods_used} defect={_short(bf.defect)} "
          f"stabilized={bf.stabilized}")
    print(f"  sup gap to the value field: {_short(gap)}")
    if args.out:
        payload = {"command": "peierls", "model": model.name, "c": args.c,
                   "N": mesh.N, "K": mesh.K, "x0": x0, "h_delta": sol.h_delta,
                   "periods_used": bf.periods_used, "defect": bf.defect,
                   "stabilized": bf.stabilized, "sup_gap": gap, "rows": rows}
        manifest = args_manifest("peierls", [
            ("model", args.model), ("c", args.c), ("n", args.n),
            ("lam", args.lam), ("x0", x0), ("t_max", args.t_max),
            ("n_vel", args.n_vel), ("max_periods", args.max_periods)])
        paths = emit_report(args.out, payload, rows, manifest)
        print(f"report: {paths['json']}")
    return 0


def _cmd_check(args) -> int:
    model = make_model(args.model)
    rep = compute_separatrix(model) if args.separatrix else None
    from .model import check_tonelli
    rpt = check_tonelli(model)
    print(f"{model.name}: ok={rpt.ok} min_H_pp={_short(rpt.min_H_pp)} "
          f"periodic_x={_short(rpt.periodicity_x)} "
          f"periodic_t={_short(rpt.periodicity_t)}")
    for note in rpt.notes:
        print(f"  note: {note}")
    if rep is not None:
        print(f"  separatrix plateau c in [{_short(rep.c0)}, "
              f"{_short(rep.c1)}], wells at {[_short(w) for w in rep.wells]}")
    return 0 if rpt.ok else 1


# ---------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjselect",
        description="staggered schemes for periodic conservation laws: "
                    "effective constants, walk statistics, orbit ranking, "
                    "action barriers, selection experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("effective", help="effective values on one mesh ladder")
    p.add_argument("--model", required=True, choices=sorted(PRESETS))
    p.add_argument("--c", type=float, action="append",
                   help="tilt value; repeat for several")
    p.add_argument("--n", type=int, action="append",
                   help="spatial resolution; repeat for several")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--max-periods", type=int, default=400)
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(func=_cmd_effective)

    p = sub.add_parser("walk-stats",
                       help="controlled-walk marginals and compensation gap")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--xi", type=float, default=0.3)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--mc", type=int, default=0,
                   help="optional Monte Carlo cross-check sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(func=_cmd_walk_stats)

    p = sub.add_parser("orbits",
                       help="minimizing orbits and their selection ranks")
    p.add_argument("--model", required=True, choices=sorted(PRESETS))
    p.add_argument("--q", type=int, default=1, help="orbit period in cells")
    p.add_argument("--lam", type=float, action="append",
                   help="mesh ratio to rank at; repeat for several")
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(func=_cmd_orbits)

    p = sub.add_parser("peierls", help="numeric action barrier from a point")
    p.add_argument("--model", required=True, choices=sorted(PRESETS))
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--x0", type=float,
                   help="base point; defaults to the predicted orbit")
    p.add_argument("--t-max", type=int, default=200)
    p.add_argument("--n-vel", type=int, default=129)
    p.add_argument("--max-periods", type=int, default=400)
    p.add_argument("--out", help="directory for report files")
    p.set_defaults(func=_cmd_peierls)

    p = sub.add_parser("check", help="structural assumptions of a preset")
    p.add_argument("--model", required=True, choices=sorted(PRESETS))
    p.add_argument("--separatrix", action="store_true",
                   help="also locate the plateau and the wells")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("select", help="run a selection experiment config")
    mode = p.add_subparsers(dest="mode", required=True)
    for name, blurb in (("run", "refinement ladder at one mesh ratio"),
                        ("sweep", "detection across a mesh-ratio grid"),
                        ("compare", "diffusive-scaling comparison")):
        q = mode.add_parser(name, help=blurb)
        q.add_argument("config", help="TOML experiment description")
        q.add_argument("--out", help="override the configured output dir")
        q.set_defaults(func=_cmd_select, mode=name)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, RangeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:                     # CLI boundary: map to exit 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
