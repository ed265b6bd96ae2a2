"""Line-oriented run configuration.

Format: one ``key = value`` per line, ``#`` starts a comment, keys are dotted
(``operator.kind``, ``grid.h``). Numeric values accept ``pi`` arithmetic
(``pi/256``, ``2*pi``); ``grid.h`` accepts a comma-separated ladder.
"""

from __future__ import annotations

import ast
import math
import operator as _op
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .matrix_ops import ConfigurationError, EllipticitySpec, OperatorKind, SymMatrix


class ConfigError(ConfigurationError):
    """Parse or validation failure, tagged with the offending line and key."""

    def __init__(self, message, line=None, key=None):
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{message}")
        self.line = line
        self.key = key


_BINOPS = {ast.Add: _op.add, ast.Sub: _op.sub, ast.Mult: _op.mul, ast.Div: _op.truediv,
           ast.Pow: _op.pow}
_UNOPS = {ast.USub: _op.neg, ast.UAdd: _op.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "log": np.log,
          "abs": np.abs, "tanh": np.tanh, "minimum": np.minimum, "maximum": np.maximum}


def _eval_node(node, names: dict):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, names)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, names), _eval_node(node.right, names))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand, names))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
            and not node.keywords:
        return _FUNCS[node.func.id](*[_eval_node(a, names) for a in node.args])
    raise ValueError(f"unsupported expression {ast.dump(node)[:60]}")


def eval_number(text: str) -> float:
    """A float from a literal or ``pi`` arithmetic (``pi/256``, ``2*pi``)."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
        val = _eval_node(tree, {"pi": math.pi, "e": math.e})
    except (SyntaxError, ValueError, ZeroDivisionError, TypeError) as exc:
        raise ValueError(f"not a number: {text!r} ({exc})") from None
    if not isinstance(val, float) or not math.isfinite(val):
        raise ValueError(f"not a finite number: {text!r}")
    return val


def compile_expression(text: str, dim: int):
    """``fn(x[, y])`` from an arithmetic expression in ``x``, ``y``, ``pi``."""
    tree = ast.parse(text.strip(), mode="eval")

    def fn(*coords):
        names = {"pi": math.pi, "e": math.e, "x": coords[0]}
        if dim == 2:
            names["y"] = coords[1]
        return _eval_node(tree, names)

    # validate against a dummy point
    fn(*([np.array([0.5])] * dim))
    return fn


def _float(s):
    return eval_number(s)


def _int(s):
    v = eval_number(s)
    if v != int(v):
        raise ValueError(f"not an integer: {s!r}")
    return int(v)


def _str(s):
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        s = s[1:-1]
    return s


def _ladder(s):
    vals = [eval_number(p) for p in s.split(",") if p.strip()]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _rows(s):
    """``a b c; d e f`` -> tuple of float tuples."""
    rows = [tuple(eval_number(x) for x in r.split()) for r in s.split(";") if r.strip()]
    if not rows:
        raise ValueError("empty list")
    return tuple(rows)


def _opt_float(s):
    return None if s.strip().lower() in ("none", "auto", "") else eval_number(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_TYPE_NAMES = {_float: "number", _int: "integer", _str: "string", _ladder: "number list",
               _rows: "rows 'a b; c d'", _opt_float: "number or auto", _bool: "boolean"}

# key -> (parser, default, description)
SCHEMA: dict[str, tuple] = {
    "domain.shape": (_str, "interval", "interval | rectangle | disk | polygon"),
    "domain.length": (_float, math.pi, "interval length (domain is (0, length))"),
    "domain.lx": (_float, 1.0, "rectangle width (domain is (0,lx) x (0,ly))"),
    "domain.ly": (_float, 1.0, "rectangle height"),
    "domain.radius": (_float, 1.0, "disk radius (centred at the origin)"),
    "domain.vertices": (_rows, None, "polygon vertices 'x y; x y; ...' counter-clockwise"),
    "operator.kind": (_str, "laplacian", "laplacian | pucci_minus | pucci_plus | bellman_inf"),
    "operator.lambda_low": (_float, 1.0, "lower ellipticity constant lambda"),
    "operator.lambda_high": (_float, 1.0, "upper ellipticity constant Lambda"),
    "operator.matrices": (_rows, None, "bellman_inf coefficient matrices, upper triangles 'a11 a12 a22; ...'"),
    "m": (_float, 1.0, "diffusion exponent m >= 1"),
    "grid.h": (_ladder, None, "grid spacing or ladder 'pi/64, pi/128'; default min extent / 128"),
    "grid.frames": (_int, 8, "stencil frames K in {1, 2, 4, 8}"),
    "initial.kind": (_str, "default", "default | distance | distance_power | eigen_laplacian | expr | file"),
    "initial.power": (_float, 0.5, "exponent q for distance_power"),
    "initial.expr": (_str, "", "expression in x, y, pi (initial.kind = expr)"),
    "initial.file": (_str, "", "field CSV path (initial.kind = file)"),
    "time.t_end": (_float, 1.0, "final time"),
    "time.schedule": (_str, "uniform", "uniform | geometric"),
    "time.snap": (_float, 0.1, "uniform spacing or geometric ratio"),
    "time.t_first": (_opt_float, None, "first geometric snapshot time"),
    "flow.eta": (_float, 0.0, "Dirichlet lift eta (m > 1 only)"),
    "flow.cfl_safety": (_float, 0.5, "CFL safety factor in (0, 1]"),
    "flow.max_steps": (_int, 50_000_000, "step budget per run"),
    "eigen.tol_mu": (_float, 1e-5, "eigenvalue tolerance (linear mode)"),
    "eigen.tol_profile": (_float, 1e-4, "profile tolerance"),
    "eigen.max_time": (_opt_float, None, "time budget for the linear solve"),
    "check.band": (_float, 4.0, "band width in cells excluded near the boundary"),
    "check.transform": (_str, "auto", "auto | identity | log | power"),
    "check.power": (_float, 0.5, "exponent q for the power transform"),
    "check.target": (_str, "initial", "concavity target: initial | eigen | flow"),
    "check.pairs": (_int, 20, "random ordered pairs for the comparison check"),
    "check.window": (_ladder, (0.5, 4.0), "time window 'a, b' for AB and barrier checks"),
    "check.snap_dt": (_float, 0.01, "snapshot spacing for the AB check"),
    "barrier.kind": (_str, "heat_kernel", "heat_kernel | truncated_heat | barenblatt"),
    "barrier.sign": (_str, "sub", "sub | exact"),
    "barrier.c0": (_float, 1.0, "heat-kernel amplitude"),
    "barrier.tau": (_float, 0.0, "time shift"),
    "barrier.delta0": (_float, 0.01, "truncation level"),
    "barrier.c": (_float, 1.0, "Barenblatt constant"),
    "output.dir": (_str, "", "output directory (default: $PUCCIFLOW_OUTPUT/<command>)"),
    "seed": (_int, 0, "random seed"),
}


@dataclass
class RunConfig:
    """Fully resolved configuration: every schema key has a value."""

    values: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    # derived objects -----------------------------------------------------------------

    def spec(self) -> EllipticitySpec:
        return EllipticitySpec(self["operator.lambda_low"], self["operator.lambda_high"])

    def operator(self) -> OperatorKind:
        mats = ()
        if self["operator.matrices"]:
            mats = tuple(SymMatrix.from_upper(r) for r in self["operator.matrices"])
        return OperatorKind(self["operator.kind"], self.spec(), mats)

    def domain(self):
        from .grid import Disk, Interval, Polygon, Rectangle
        s = self["domain.shape"]
        if s == "interval":
            return Interval(self["domain.length"])
        if s == "rectangle":
            return Rectangle(self["domain.lx"], self["domain.ly"])
        if s == "disk":
            return Disk(self["domain.radius"])
        return Polygon(self["domain.vertices"])

    def ladder(self) -> tuple:
        h = self["grid.h"]
        if h is None:
            return (self.domain().min_extent / 128,)
        return h

    def schedule(self):
        from .flow import SnapshotSchedule
        return SnapshotSchedule(self["time.schedule"], self["time.snap"], self["time.t_first"])

    def flow_config(self):
        from .flow import FlowConfig
        return FlowConfig(operator=self.operator(), m=self["m"], eta=self["flow.eta"],
                          cfl_safety=self["flow.cfl_safety"], t_end=self["time.t_end"],
                          schedule=self.schedule(), frames=self["grid.frames"],
                          max_steps=self["flow.max_steps"])

    def to_text(self) -> str:
        """Resolved config in the input format; parses back to the same values."""
        out = []
        for k in SCHEMA:
            v = self.values[k]
            out.append(f"{k} = {format_value(v)}")
        return "\n".join(out) + "\n"

    def echo(self) -> dict:
        return {k: (list(map(list, v)) if k in ("domain.vertices", "operator.matrices") and v
                    else list(v) if isinstance(v, tuple) else v)
                for k, v in self.values.items()}


def format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(" ".join(repr(x) for x in r) for r in v)
        return ", ".join(repr(x) for x in v)
    return str(v)


_NULLABLE_TEXT = {"domain.vertices", "operator.matrices", "grid.h"}


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; defaults fill every missing key."""
    vals: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", no, key)
        if key in vals:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", no, key)
        parser = SCHEMA[key][0]
        if key in _NULLABLE_TEXT and value.lower() == "auto":
            vals[key] = None
        else:
            try:
                vals[key] = parser(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: expected {_TYPE_NAMES[parser]}, {exc}", no, key) from None
        lines[key] = no
    for k, (_, default, _) in SCHEMA.items():
        vals.setdefault(k, default)
    cfg = RunConfig(vals, lines)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", cfg.lines.get(key), key)

    choices = {"domain.shape": ("interval", "rectangle", "disk", "polygon"),
               "operator.kind": OperatorKind.VARIANTS,
               "initial.kind": ("default", "distance", "distance_power", "eigen_laplacian", "expr", "file"),
               "time.schedule": ("uniform", "geometric"),
               "check.transform": ("auto", "identity", "log", "power"),
               "check.target": ("initial", "eigen", "flow"),
               "barrier.kind": ("heat_kernel", "truncated_heat", "barenblatt"),
               "barrier.sign": ("sub", "exact")}
    for k, opts in choices.items():
        if cfg[k] not in opts:
            fail(k, f"{cfg[k]!r} is not one of {', '.join(opts)}")
    lo, hi = cfg["operator.lambda_low"], cfg["operator.lambda_high"]
    if not lo > 0:
        fail("operator.lambda_low", f"must be positive, got {lo}")
    if hi < lo:
        fail("operator.lambda_high", f"lambda_high = {hi} is below lambda_low = {lo}")
    if cfg["m"] < 1:
        fail("m", f"must be >= 1, got {cfg['m']}")
    if cfg["m"] == 1 and cfg["flow.eta"] != 0:
        fail("flow.eta", "eta-lift requires m > 1")
    if cfg["flow.eta"] < 0:
        fail("flow.eta", f"must be >= 0, got {cfg['flow.eta']}")
    if not 0 < cfg["flow.cfl_safety"] <= 1:
        fail("flow.cfl_safety", f"must lie in (0, 1], got {cfg['flow.cfl_safety']}")
    if not cfg["time.t_end"] > 0:
        fail("time.t_end", f"must be positive, got {cfg['time.t_end']}")
    if cfg["grid.frames"] not in (1, 2, 4, 8):
        fail("grid.frames", f"must be 1, 2, 4 or 8, got {cfg['grid.frames']}")
    if cfg["grid.h"] is not None and any(not h > 0 for h in cfg["grid.h"]):
        fail("grid.h", f"spacings must be positive, got {cfg['grid.h']}")
    if cfg["domain.shape"] == "polygon" and not cfg["domain.vertices"]:
        fail("domain.vertices", "polygon domain needs vertices")
    if cfg["operator.kind"] == "bellman_inf" and not cfg["operator.matrices"]:
        fail("operator.matrices", "bellman_inf needs coefficient matrices")
    if cfg["initial.kind"] == "expr" and not cfg["initial.expr"]:
        fail("initial.expr", "initial.kind = expr needs an expression")
    if cfg["initial.kind"] == "file" and not cfg["initial.file"]:
        fail("initial.file", "initial.kind = file needs a path")
    if len(cfg["check.window"]) != 2 or not 0 < cfg["check.window"][0] < cfg["check.window"][1]:
        fail("check.window", f"expected '0 < a < b', got {cfg['check.window']}")
    for key, build in (("operator.kind", cfg.operator), ("domain.shape", cfg.domain),
                       ("time.schedule", cfg.schedule)):
        try:
            build()
        except (ConfigurationError, ValueError) as exc:
            fail(key, str(exc))
    if cfg["initial.kind"] == "expr":
        try:
            compile_expression(cfg["initial.expr"], 1 if cfg["domain.shape"] == "interval" else 2)
        except (SyntaxError, ValueError, TypeError) as exc:
            fail("initial.expr", f"cannot evaluate {cfg['initial.expr']!r}: {exc}")


def defaults_text() -> str:
    """Table of every key, its type, default and meaning."""
    rows = []
    for k, (p, d, doc) in SCHEMA.items():
        rows.append(f"  {k:<22} {_TYPE_NAMES[p]:<18} {format_value(d):<22} {doc}")
    return "Config keys (key = value, '#' comments, pi arithmetic allowed):\n" + "\n".join(rows)
