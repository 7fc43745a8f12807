"""INI-style run configuration: parsing, validation, canonical printing and
construction of the library objects it describes."""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import nfunction as nf
from .. import operators as ops
from ..morlicz import SpaceTimeGrid
from ..solver import ProblemSpec, SolverConfig
from . import expressions as ex


class ConfigError(ValueError):
    """Invalid configuration; carries the section, key and 1-based line/column when known."""

    def __init__(self, message, *, section=None, key=None, line=None, col=None):
        where = []
        if section:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        if line:
            where.append(f"line {line}" + (f", column {col}" if col else ""))
        super().__init__(f"{message}" + (f" ({'; '.join(where)})" if where else ""))
        self.message = message
        self.section, self.key, self.line, self.col = section, key, line, col


# key -> (kind, default); a default of None means "absent unless given"
SCHEMA = {
    "problem": {
        "extents": ("floats", (0.0, 1.0)),
        "cells": ("ints", (64,)),
        "T": ("const", 0.25),
        "dt": ("const", 1.0 / 256.0),
    },
    "operator": {
        "family": ("choice:p-laplacian|double-phase|anti", "p-laplacian"),
        "p": ("expr", "2"),
        "q": ("const", None),
        "a": ("expr", None),
        "a_max": ("const", None),
        "p_minus": ("const", None),
        "p_plus": ("const", None),
        "c": ("const", 2.0),
    },
    "source": {"f": ("expr", "0")},
    "initial": {"u0": ("expr", "0")},
    "solver": {
        "newton_tol": ("const", 1e-10),
        "max_newton": ("int", 50),
        "max_halvings": ("int", 20),
        "theta0": ("const", 1e-2),
        "theta_min": ("const", 1e-6),
        "picard_fallback": ("bool", True),
        "delta_reg": ("const", 1e-8),
        "initial_guess": ("choice:warm|previous|zero", "warm"),
    },
    "verify": {
        "j_list": ("ints", (4, 8, 16, 32)),
        "eps_list": ("floats", (0.125, 0.0625, 0.03125)),
        "k_list": ("floats", (1.0, 2.0)),
        "lambdas": ("floats", (1.0, 0.5, 0.25)),
        "deltas": ("floats", (0.25, 0.125, 0.0625)),
        "theta_C": ("const", 1.0),
        "points_per_edge": ("int", 16),
        "samples": ("int", 100_000),
        "psi_j": ("int", 8),
        "approx_j": ("int", 2),
        "approx_k": ("const", 10.0),
        "decay_C": ("const", 1.0),
    },
    "convergence": {
        "exact": ("expr", None),
        "decay_rate": ("const", None),
        "cells_list": ("ints", (32, 64, 128)),
        "dt_fixed": ("const", 1.0 / 256.0),
        "dt_list": ("floats", (1.0 / 64, 1.0 / 128, 1.0 / 256)),
        "cells_fixed": ("ints", (128,)),
        "min_space_order": ("const", 1.8),
        "min_time_order": ("const", 0.9),
    },
    "output": {
        "dir": ("str", "out"),
        "formats": ("strs", ("csv", "json")),
    },
    "run": {"seed": ("int", 42)},
}


@dataclass
class RunConfig:
    """Typed configuration: ``values[section][key]``; expressions are kept as ASTs."""

    values: dict
    breakpoints: tuple = ()
    source_name: str = "<string>"

    def __getitem__(self, section):
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values and self.breakpoints == other.breakpoints

    @property
    def dim(self):
        return len(self.values["problem"]["cells"])

    @property
    def seed(self):
        return self.values["run"]["seed"]


def _locate(text, section, key):
    """1-based line and column of ``key`` inside ``[section]``; ``(None, None)`` if absent."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*[=:]", line, flags=re.IGNORECASE):
            eq = raw.index("=") if "=" in raw else raw.index(":")
            value_col = eq + 2 + (len(raw[eq + 1 :]) - len(raw[eq + 1 :].lstrip()))
            return i, value_col
    return None, None


def _convert(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "expr":
            return ex.parse(raw)
        if kind == "const":
            return ex.constant_value(ex.parse(raw))
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(f"not a boolean: {raw!r}")
            return low in ("true", "yes", "1")
        if kind == "str":
            return raw
        if kind == "strs":
            return tuple(raw.replace(",", " ").split())
        if kind == "floats":
            return tuple(ex.constant_value(ex.parse(p)) for p in raw.replace(",", " ").split())
        if kind == "ints":
            return tuple(int(p) for p in raw.replace(",", " ").split())
        if kind.startswith("choice:"):
            options = kind.split(":", 1)[1].split("|")
            if raw not in options:
                raise ValueError(f"expected one of {options}, got {raw!r}")
            return raw
    except ex.ExpressionError as err:
        line, col = where
        raise ConfigError(err.message, line=line, col=(col + err.col - 1) if col else err.col) from None
    except ValueError as err:
        line, col = where
        raise ConfigError(str(err), line=line, col=col) from None
    raise AssertionError(kind)


def parse_config(text: str, source_name: str = "<string>") -> RunConfig:
    """Parse and validate configuration text."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source_name)
    except configparser.DuplicateOptionError as err:
        raise ConfigError(f"duplicate key {err.option!r}", section=err.section, key=err.option,
                          line=err.lineno) from None
    except configparser.ParsingError as err:
        line, raw = err.errors[0]
        raise ConfigError(f"cannot parse {raw.strip()!r} (expected 'key = value')", line=line) from None
    except configparser.Error as err:
        raise ConfigError(f"syntax error: {err}", line=getattr(err, "lineno", None)) from None

    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            line, _ = _locate_section(text, section)
            raise ConfigError(f"unknown section [{section}]", line=line)
    for section, keys in SCHEMA.items():
        given = cp[section] if cp.has_section(section) else {}
        for key in given:
            if key not in keys:
                line, col = _locate(text, section, key)
                raise ConfigError(f"unknown key {key!r}", section=section, key=key, line=line)
        out = {}
        for key, (kind, default) in keys.items():
            if key in given:
                where = _locate(text, section, key)
                try:
                    out[key] = _convert(kind, given[key], where)
                except ConfigError as err:
                    raise ConfigError(err.message, section=section, key=key,
                                      line=err.line, col=err.col) from None
            elif default is None:
                out[key] = None
            elif kind == "expr":
                out[key] = ex.parse(default)
            else:
                out[key] = default
        values[section] = out
    cfg = RunConfig(values, source_name=source_name)
    _validate(cfg, text)
    return cfg


def _locate_section(text, section):
    for i, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{section}]":
            return i, 1
    return None, None


def _validate(cfg: RunConfig, text: str):
    pr = cfg["problem"]
    ext = pr["extents"]

    def fail(msg, section, key):
        line, col = _locate(text, section, key)
        raise ConfigError(msg, section=section, key=key, line=line, col=col)

    if len(ext) != 2 * len(pr["cells"]):
        fail("extents need a (lo, hi) pair per axis of cells", "problem", "extents")
    if len(pr["cells"]) not in (1, 2) or any(n < 2 for n in pr["cells"]):
        fail("cells must list one or two counts >= 2", "problem", "cells")
    if not (pr["T"] > 0 and pr["dt"] > 0):
        fail("T and dt must be positive", "problem", "T" if pr["T"] <= 0 else "dt")
    d = len(pr["cells"])
    allowed = {"t", "pi"} | {f"x{i + 1}" for i in range(d)}
    bps = []
    for section, key in (("operator", "p"), ("operator", "a"), ("source", "f"), ("initial", "u0"),
                         ("convergence", "exact")):
        node = cfg[section][key]
        if node is None:
            continue
        bad = ex.names(node) - allowed
        if section == "initial":
            bad |= ex.names(node) & {"t"}
        if bad:
            fail(f"names {sorted(bad)} are not available here", section, key)
        for b in ex.breakpoints(node):
            if not 0.0 < b < pr["T"]:
                fail(f"breakpoint {b:g} lies outside (0, T)", section, key)
            bps.append(b)
    op = cfg["operator"]
    if op["family"] == "double-phase" and (op["q"] is None or op["a"] is None):
        fail("double-phase needs q and a", "operator", "family")
    if op["family"] == "double-phase" and not ex.is_constant(op["p"]):
        fail("double-phase p must be constant", "operator", "p")
    so = cfg["solver"]
    if so["theta0"] < 0 or so["theta_min"] < 0 or (so["theta0"] > 0 and so["theta_min"] > so["theta0"]):
        fail("need 0 <= theta_min <= theta0", "solver", "theta_min")
    cfg.breakpoints = tuple(sorted(set(bps)))


def _fmt(kind, value):
    if value is None:
        return None
    if kind == "expr":
        return ex.to_source(value)
    if kind == "const":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind in ("floats",):
        return " ".join(repr(float(v)) for v in value)
    if kind in ("ints", "strs"):
        return " ".join(str(v) for v in value)
    return str(value)


def print_config(cfg: RunConfig) -> str:
    """Canonical text with every key spelled out; ``parse_config(print_config(c)) == c``."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (kind, _) in keys.items():
            text = _fmt(kind, cfg[section][key])
            if text is not None:
                lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


def config_echo(cfg: RunConfig) -> dict:
    out = {}
    for section, keys in SCHEMA.items():
        out[section] = {k: _fmt(kind, cfg[section][k]) for k, (kind, _) in keys.items()}
    out["breakpoints"] = list(cfg.breakpoints)
    return out


# --------------------------------------------------------------------------
# Object construction
# --------------------------------------------------------------------------


def build_grid(cfg: RunConfig, *, cells=None, dt=None) -> SpaceTimeGrid:
    pr = cfg["problem"]
    ext = pr["extents"]
    extents = tuple((ext[2 * i], ext[2 * i + 1]) for i in range(len(pr["cells"])))
    return SpaceTimeGrid(extents, tuple(cells or pr["cells"]), pr["T"], dt or pr["dt"], cfg.breakpoints)


def _sample_range(fn, grid: SpaceTimeGrid, breakpoints):
    times = list(grid.times)
    for b in breakpoints:
        times += [b, np.nextafter(b, np.inf)]
    x = grid.nodes()
    vals = [fn(np.full(x.shape[0], t), x) for t in times]
    return float(np.min(vals)), float(np.max(vals))


def build_nfunction(cfg: RunConfig, grid: Optional[SpaceTimeGrid] = None) -> nf.NFunction:
    grid = grid or build_grid(cfg)
    op = cfg["operator"]
    d = cfg.dim
    if op["family"] == "anti":
        return ops.anti_example(d).governing
    if op["family"] == "p-laplacian":
        p = ex.compile_expr(op["p"])
        lo, hi = _sample_range(p, grid, cfg.breakpoints)
        p_minus = op["p_minus"] if op["p_minus"] is not None else lo
        p_plus = op["p_plus"] if op["p_plus"] is not None else hi
        if lo < p_minus - 1e-12 or hi > p_plus + 1e-12:
            raise ConfigError(f"exponent range [{lo:g}, {hi:g}] exceeds declared bounds", section="operator", key="p")
        if p_minus <= 1.0:
            raise ConfigError("exponent must stay above 1", section="operator", key="p")
        return nf.variable_exponent(p, (p_minus, p_plus), dim=d, breakpoints=cfg.breakpoints)
    pval = ex.constant_value(op["p"])
    a = ex.compile_expr(op["a"])
    lo, hi = _sample_range(a, grid, cfg.breakpoints)
    if lo < 0:
        raise ConfigError("double-phase weight must be nonnegative", section="operator", key="a")
    a_max = op["a_max"] if op["a_max"] is not None else hi
    if not 1.0 < pval <= op["q"]:
        raise ConfigError("double-phase needs 1 < p <= q", section="operator", key="q")
    return nf.double_phase(pval, op["q"], a, a_max, dim=d, breakpoints=cfg.breakpoints)


def build_operator(cfg: RunConfig, grid: Optional[SpaceTimeGrid] = None):
    op = cfg["operator"]
    if op["family"] == "anti":
        return ops.anti_example(cfg.dim)
    M = build_nfunction(cfg, grid)
    if op["family"] == "p-laplacian":
        return ops.p_laplacian(M, c=op["c"])
    return ops.double_phase_operator(M, c=op["c"])


def build_solver_config(cfg: RunConfig) -> SolverConfig:
    so = cfg["solver"]
    return SolverConfig(
        newton_tol=so["newton_tol"],
        max_newton=so["max_newton"],
        max_halvings=so["max_halvings"],
        theta0=so["theta0"],
        theta_min=so["theta_min"],
        picard_fallback=so["picard_fallback"],
        delta_reg=so["delta_reg"],
        initial_guess=so["initial_guess"],
    )


def build_problem(cfg: RunConfig, *, cells=None, dt=None) -> ProblemSpec:
    grid = build_grid(cfg, cells=cells, dt=dt)
    A = build_operator(cfg, grid)
    f = ex.compile_expr(cfg["source"]["f"])
    u0 = ex.compile_expr(cfg["initial"]["u0"])
    return ProblemSpec(grid, A, f, lambda x: u0(0.0, x))
