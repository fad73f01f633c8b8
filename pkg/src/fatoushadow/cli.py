"""Command-line driver.

    fatoushadow <preimages|shadow|verify|render> --config run.json [--out PATH]

Exit codes: 0 ok, 2 configuration error, 3 numeric or capacity error,
4 a verified property was violated, 5 output could not be written.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from . import blaschke, polydyn, shadowing
from .blaschke import BlaschkeProduct
from .errors import AnnulusNotFoundError, NumericError, PreconditionError
from .hyperbolic import poincare_distance
from .polydyn import Polynomial, Viewport

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION, EXIT_IO = 0, 2, 3, 4, 5
COMMANDS = ("preimages", "shadow", "verify", "render")

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_COMPLEX_LIST = {"type": "array", "items": _COMPLEX}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "map": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "properties": {
                "blaschke": {
                    "type": "object",
                    "properties": {"theta": {"type": "number"}, "zeros": _COMPLEX_LIST},
                    "required": ["zeros"],
                    "additionalProperties": False,
                },
                "polynomial": {
                    "type": "object",
                    "properties": {"coefficients": _COMPLEX_LIST},
                    "required": ["coefficients"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "base_point": _COMPLEX,
        "depth": {"type": "integer", "minimum": 0},
        "method": {"enum": ["solver", "closed_form"]},
        "grid": {
            "oneOf": [
                {"type": "object",
                 "properties": {"i_max": {"type": "integer", "minimum": 1},
                                "angles": {"type": "integer", "minimum": 8}},
                 "required": ["i_max", "angles"], "additionalProperties": False},
                {"type": "object",
                 "properties": {"points": {**_COMPLEX_LIST, "minItems": 1}},
                 "required": ["points"], "additionalProperties": False},
            ]
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "boundary_samples": {"type": "integer", "minimum": 1},
        "profile_depth": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "viewport": {
            "type": "object",
            "properties": {"center": _COMPLEX, "width": {"type": "number"},
                           "height": {"type": "number"}},
            "required": ["center", "width", "height"],
            "additionalProperties": False,
        },
        "resolution": {"type": "array", "items": {"type": "integer", "minimum": 1},
                       "minItems": 2, "maxItems": 2},
        "max_iter": {"type": "integer", "minimum": 1},
        "overlay_depth": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "csv_output": {"type": "string"},
    },
    "required": ["map"],
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


class PropertyViolation(Exception):
    pass


def fmt(x: float) -> str:
    """17 significant digits: enough for an exact double round trip."""
    return format(float(x), ".17g")


def _complex(pair) -> complex:
    return complex(pair[0], pair[1])


def _reject_constant(name):
    raise ConfigError(f"non-finite number {name} in config")


@dataclass
class RunConfig:
    command: str
    raw: dict[str, Any]
    blaschke: BlaschkeProduct | None = None
    polynomial: Polynomial | None = None
    base_point: complex | None = None
    output: str | None = None
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.raw.get(key, default)


def parse_config(text: str, command: str | None = None) -> RunConfig:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
    cmd = command or raw.get("command")
    if cmd not in COMMANDS:
        raise ConfigError("no command given")
    if command and raw.get("command") not in (None, command):
        raise ConfigError(f"config is for '{raw['command']}', not '{command}'")
    cfg = RunConfig(cmd, raw, output=raw.get("output"), seed=raw.get("seed", 0))
    spec = raw["map"]
    try:
        if "blaschke" in spec:
            b = spec["blaschke"]
            cfg.blaschke = BlaschkeProduct(b.get("theta", 0.0), [_complex(z) for z in b["zeros"]])
        else:
            cfg.polynomial = Polynomial(tuple(_complex(c) for c in spec["polynomial"]["coefficients"]))
    except PreconditionError as exc:
        raise ConfigError(f"invalid map: {exc}") from exc
    if "base_point" in raw:
        cfg.base_point = _complex(raw["base_point"])
    return cfg


def config_to_json(cfg: RunConfig) -> str:
    """Serialise the map and base point back to a config document."""
    doc = dict(cfg.raw)
    doc["command"] = cfg.command
    if cfg.blaschke is not None:
        doc["map"] = {"blaschke": {"theta": cfg.blaschke.theta,
                                   "zeros": [[z.real, z.imag] for z in cfg.blaschke.zeros]}}
    else:
        doc["map"] = {"polynomial": {"coefficients": [[c.real, c.imag]
                                                      for c in cfg.polynomial.coefficients]}}
    if cfg.base_point is not None:
        doc["base_point"] = [cfg.base_point.real, cfg.base_point.imag]
    # json writes floats with repr, the shortest exact round-trip form
    return json.dumps(doc, sort_keys=True)


def write_atomic(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        # mkstemp creates 0600 files; give the result ordinary permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit_text(cfg: RunConfig, text: str, stdout) -> None:
    if cfg.output:
        write_atomic(cfg.output, text.encode("utf-8"))
    else:
        stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _need_blaschke(cfg: RunConfig) -> BlaschkeProduct:
    if cfg.blaschke is None:
        raise ConfigError(f"'{cfg.command}' needs a blaschke map")
    return cfg.blaschke


def cmd_preimages(cfg: RunConfig, stdout) -> int:
    depth = cfg.get("depth", 1)
    method = cfg.get("method", "solver")
    header = ("generation", "re", "im", "modulus", "residual")
    if cfg.polynomial is not None:
        f = cfg.polynomial
        p = cfg.base_point
        if p is None:
            att = polydyn.attracting_points(f)
            if not att:
                raise ConfigError("polynomial has no attracting fixed point; give base_point")
            p = att[0]
        tree = polydyn.inverse_orbit_tree_poly(f, p, depth)
        rows = _tree_rows(tree)
    else:
        g = cfg.blaschke
        p = cfg.base_point if cfg.base_point is not None else 0j
        if method == "closed_form":
            if not g.is_power_map:
                raise ConfigError("closed_form preimages need a power map (all zeros at 0)")
            rows = []
            for k in range(depth + 1):
                for q in blaschke.power_map_preimages(g.m, g.theta, p, k):
                    res = abs(blaschke.iterate(g, q, k) - p)
                    rows.append((str(k), fmt(q.real), fmt(q.imag), fmt(abs(q)), fmt(res)))
        else:
            rows = _tree_rows(blaschke.preimage_tree(g, p, depth))
    _emit_text(cfg, _csv(header, rows), stdout)
    return EXIT_OK


def _tree_rows(tree):
    return [(str(int(k)), fmt(z.real), fmt(z.imag), fmt(abs(z)), fmt(r))
            for z, k, r in zip(tree.points, tree.generation, tree.residual)]


def _grid(cfg: RunConfig) -> shadowing.SampleGrid:
    spec = cfg.get("grid")
    if spec is None:
        raise ConfigError("'shadow' needs a grid")
    try:
        if "points" in spec:
            return shadowing.SampleGrid.from_points([_complex(p) for p in spec["points"]])
        return shadowing.SampleGrid(spec["i_max"], spec["angles"])
    except (ValueError, PreconditionError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def cmd_shadow(cfg: RunConfig, stdout) -> int:
    g = _need_blaschke(cfg)
    p = cfg.base_point if cfg.base_point is not None else 0j
    depth = cfg.get("depth", 8)
    grid = _grid(cfg)
    report = shadowing.empirical_constant(g, p, depth, grid)
    header = ("index", "z0_re", "z0_im", "q_re", "q_im", "generation", "distance", "status")
    rows = []
    for i, (z, q, k, d, st) in enumerate(zip(report.z0, report.best_q, report.generation,
                                             report.distance, report.status)):
        rows.append((str(i), fmt(z.real), fmt(z.imag), fmt(q.real), fmt(q.imag), str(int(k)),
                     fmt(d) if st == "ok" else "nan", st))
    text = _csv(header, rows)
    summary = [("empirical_sup", fmt(report.empirical_sup)), ("depth", str(depth)),
               ("grid", grid.describe()), ("samples", str(len(rows))),
               ("overflow_samples", str(report.n_errors))]
    for key in ("sigma", "C0_prime", "C0_doubleprime", "C0"):
        val = report.constants.get(key)
        summary.append((key, fmt(val) if val is not None else "absent"))
    text += "".join(f"# {k},{v}\n" for k, v in summary)
    _emit_text(cfg, text, stdout)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stdout) -> int:
    g = _need_blaschke(cfg)
    if g.m1 < 1:
        raise ConfigError("'verify' needs a zero at the origin (m1 >= 1)")
    eps = cfg.get("epsilon", shadowing.DEFAULT_EPSILON)
    rng = np.random.default_rng(cfg.seed)
    n_b = cfg.get("boundary_samples", 10**4)
    zeta = np.exp(2j * np.pi * rng.random(n_b))
    bd = blaschke.boundary_derivative_modulus(g, zeta)
    # strictly above m1 as soon as one zero is off the origin
    lemma1_ok = bool(bd.min() > 1 and (g.is_power_map or bd.min() > g.m1))
    report: dict[str, Any] = {
        "boundary_derivative": {"pass": lemma1_ok, "min_modulus": float(bd.min()),
                                "m1": g.m1, "samples": n_b},
    }
    try:
        annulus = shadowing.find_expanding_annulus(g, eps)
    except AnnulusNotFoundError as exc:
        report["annulus"] = {"found": False, "epsilon": eps, "achieved_margin": exc.achieved_margin}
        stdout.write(json.dumps(report, indent=2) + "\n")
        raise
    report["annulus"] = {"found": True, "r0": annulus.r0, "epsilon": eps}
    viol = shadowing.verify_annulus_expansion(g, annulus, cfg.get("samples", 10**4),
                                              seed=cfg.seed)
    report["annulus_expansion"] = {
        "pass": not viol, "samples": cfg.get("samples", 10**4),
        "violations": [[v.z.real, v.z.imag, v.preimage.real, v.preimage.imag] for v in viol]}
    prof_depth = cfg.get("profile_depth", 10)
    profile = shadowing.boundary_density_profile(g, prof_depth, cfg.base_point or 0j)
    gaps = [gap for _, gap in profile]
    report["density_profile"] = {
        "pass": all(b <= a for a, b in zip(gaps, gaps[1:])),
        "profile": [[k, gap] for k, gap in profile]}
    ok = all(report[k]["pass"] for k in ("boundary_derivative", "annulus_expansion",
                                         "density_profile"))
    report["pass"] = ok
    text = json.dumps(report, indent=2) + "\n"
    _emit_text(cfg, text, stdout)
    if not ok:
        failed = [k for k in ("boundary_derivative", "annulus_expansion", "density_profile")
                  if not report[k]["pass"]]
        lines = [f"failed: {', '.join(failed)}"]
        lines += [f"violation: z={fmt(v.z.real)}{v.z.imag:+.17g}j "
                  f"preimage={fmt(v.preimage.real)}{v.preimage.imag:+.17g}j" for v in viol]
        raise PropertyViolation("\n".join(lines))
    return EXIT_OK


def cmd_render(cfg: RunConfig, stdout) -> int:
    f = cfg.polynomial
    if f is None:
        raise ConfigError("'render' needs a polynomial map")
    if not cfg.output:
        raise ConfigError("'render' needs an output path")
    vp = cfg.get("viewport", {"center": [0, 0], "width": 4, "height": 4})
    try:
        viewport = Viewport(_complex(vp["center"]), float(vp["width"]), float(vp["height"]))
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from exc
    resolution = cfg.get("resolution", [256, 256])
    overlay = None
    if cfg.get("overlay_depth") is not None:
        p = cfg.base_point
        if p is None:
            att = polydyn.attracting_points(f)
            if not att:
                raise ConfigError("overlay needs an attracting fixed point or a base_point")
            p = att[0]
        overlay = polydyn.inverse_orbit_tree_poly(f, p, cfg.get("overlay_depth"))
    raster, data = polydyn.render_basin(f, viewport, resolution,
                                        cfg.get("max_iter", polydyn.DEFAULT_MAX_ITER), overlay)
    write_atomic(cfg.output, data)
    if cfg.get("csv_output"):
        rows = ((str(x), str(y), str(a), str(n)) for x, y, a, n in polydyn.raster_csv_rows(raster))
        write_atomic(cfg.get("csv_output"),
                     _csv(("x", "y", "attractor", "iterations"), rows).encode("utf-8"))
    return EXIT_OK


HANDLERS = {"preimages": cmd_preimages, "shadow": cmd_shadow,
            "verify": cmd_verify, "render": cmd_render}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = argparse.ArgumentParser(prog="fatoushadow", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="override the output path in the config")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        stderr.write(f"error: cannot read config: {exc}\n")
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.command)
        if args.out:
            cfg.output = args.out
        return HANDLERS[cfg.command](cfg, stdout)
    except (ConfigError, PreconditionError) as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except NumericError as exc:
        stderr.write(f"numeric error: {exc}\n")
        return EXIT_NUMERIC
    except PropertyViolation as exc:
        stderr.write(f"property violated: {exc}\n")
        return EXIT_VIOLATION
    except OSError as exc:
        stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
