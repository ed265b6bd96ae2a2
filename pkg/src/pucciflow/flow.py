"""Explicit monotone time integration of ``u_t = F(D^2 u^m)``.

For ``m == 1`` the state is ``u`` itself. For ``m > 1`` the state is
``w = u^m`` which solves ``w_t = m w^(1-1/m) F(D^2 w)``; the degenerate
coefficient is frozen per forward-Euler step, which keeps the update
nondecreasing in every neighbour value. With ``cfl_safety <= 1/(2 - 1/m)``
the update is also nondecreasing in the centre value, so the discrete
comparison principle holds exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .grid import Field, Grid, boundary_slopes
from .matrix_ops import ConfigurationError, InputDomainError, OperatorKind
from .stencil import DiscreteOperator, StencilSet

log = logging.getLogger(__name__)

COEF_FLOOR = 1e-14


class IntegrationError(RuntimeError):
    """A step produced a non-finite value, or the step budget ran out."""

    def __init__(self, message, node=None, point=None, time=None):
        super().__init__(message)
        self.node = node
        self.point = point
        self.time = time


@dataclass(frozen=True)
class SnapshotSchedule:
    """``geometric``: ``t_first * ratio**k``; ``uniform``: multiples of ``dt_snap``."""

    kind: str = "uniform"
    value: float = 0.1
    t_first: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("geometric", "uniform"):
            raise ConfigurationError(f"snapshot schedule must be geometric or uniform, got {self.kind!r}")
        if self.kind == "geometric" and not self.value > 1:
            raise ConfigurationError(f"geometric ratio must exceed 1, got {self.value}")
        if self.kind == "uniform" and not self.value > 0:
            raise ConfigurationError(f"uniform snapshot spacing must be positive, got {self.value}")
        if self.t_first is not None and not self.t_first > 0:
            raise ConfigurationError(f"t_first must be positive, got {self.t_first}")

    def times(self, t_end: float) -> np.ndarray:
        if self.kind == "uniform":
            n = int(math.floor(t_end / self.value + 1e-9))
            ts = [self.value * k for k in range(1, n + 1)]
        else:
            t = self.t_first if self.t_first is not None else t_end / self.value ** 24
            ts = []
            while t < t_end * (1 - 1e-12):
                ts.append(t)
                t *= self.value
        if not ts or ts[-1] < t_end * (1 - 1e-12):
            ts.append(t_end)
        return np.array([0.0] + ts)


@dataclass(frozen=True)
class FlowConfig:
    """Configuration of a flow ``u_t = F(D^2 u^m)`` with Dirichlet value ``eta``."""

    operator: OperatorKind
    m: float = 1.0
    eta: float = 0.0
    cfl_safety: float = 0.5
    t_end: float = 1.0
    schedule: SnapshotSchedule = field(default_factory=SnapshotSchedule)
    frames: int = 8
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.m >= 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")
        if self.eta < 0:
            raise ConfigurationError(f"eta must be >= 0, got {self.eta}")
        if self.m == 1 and self.eta != 0:
            raise ConfigurationError("eta-lift is only defined for m > 1")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")

    def replace(self, **kw) -> "FlowConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return FlowConfig(**d)

    def echo(self) -> dict:
        k = self.operator
        return {
            "m": self.m, "eta": self.eta, "cfl_safety": self.cfl_safety, "t_end": self.t_end,
            "schedule": {"kind": self.schedule.kind, "value": self.schedule.value,
                         "t_first": self.schedule.t_first},
            "frames": self.frames, "max_steps": self.max_steps,
            "operator": {"kind": k.variant, "lambda_low": k.spec.lambda_low,
                         "lambda_high": k.spec.lambda_high,
                         "matrices": [list(A.upper) for A in k.matrices]},
        }


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    w: Optional[np.ndarray]
    sup: float
    steps: int
    slopes: dict


@dataclass
class FlowTrace:
    """Time-ordered snapshots of a flow."""

    grid: Grid
    config: FlowConfig
    snapshots: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def sup_norms(self) -> np.ndarray:
        return np.array([s.sup for s in self.snapshots])

    @property
    def steps(self) -> int:
        return self.snapshots[-1].steps if self.snapshots else 0

    def u(self, i: int) -> Field:
        return Field(self.grid, self.snapshots[i].u)

    def w(self, i: int) -> Field:
        s = self.snapshots[i]
        return Field(self.grid, s.w if s.w is not None else s.u)

    def __len__(self):
        return len(self.snapshots)


class Flow:
    """A flow on a fixed grid: the compiled operator plus the stepping rules."""

    def __init__(self, config: FlowConfig, grid: Grid, op: DiscreteOperator | None = None):
        self.config = config
        self.grid = grid
        if op is None:
            op = DiscreteOperator(config.operator, grid, StencilSet.build(grid.dim, config.frames))
        self.op = op
        n = grid.dim
        lam_eff = config.operator.max_coefficient
        self.base_dt = config.cfl_safety * grid.h ** 2 / (2 * n * lam_eff * op.cfl_weight)

    # state conversions
    def to_state(self, u: np.ndarray) -> np.ndarray:
        s = np.array(u, dtype=float)
        s[self.grid.n_interior:] = self.config.eta
        return s ** self.config.m if self.config.m != 1 else s

    def to_u(self, state: np.ndarray) -> np.ndarray:
        m = self.config.m
        return np.maximum(state, 0.0) ** (1.0 / m) if m != 1 else state.copy()

    def cfl_dt(self, u: Field | np.ndarray) -> float:
        m = self.config.m
        if m == 1:
            return self.base_dt
        vals = u.values if isinstance(u, Field) else np.asarray(u)
        wmax = float(np.max(vals)) ** m if len(vals) else 0.0
        coef = max(wmax ** (1 - 1 / m), COEF_FLOOR)
        return self.base_dt / (m * coef)

    def _march(self, U: np.ndarray, t: float, t_target: float, max_steps: int):
        t_new, steps, bad_row, bad_node = _kernels.integrate(
            U, float(t), float(t_target), self.base_dt, float(self.config.m), COEF_FLOOR,
            int(max_steps), *self.op._args())
        if bad_node >= 0:
            raise IntegrationError(
                f"non-finite value at node {bad_node} {self.grid.points[bad_node]} near t={t_new:.6g}",
                node=int(bad_node), point=self.grid.points[bad_node], time=t_new)
        return t_new, steps

    def step(self, u: Field, dt: float) -> Field:
        """One forward-Euler step of length ``dt`` on ``u`` (not ``w``)."""
        limit = self.cfl_dt(u)
        if dt > limit * (1 + 1e-12):
            raise InputDomainError(f"dt={dt} exceeds the CFL limit {limit}")
        U = self.to_state(u.values)[None, :].copy()
        F = self.op.apply_values(U[0])
        n = self.grid.n_interior
        m = self.config.m
        if m == 1:
            U[0, :n] += dt * F
        else:
            w = U[0, :n]
            U[0, :n] = w + dt * m * np.maximum(w, 0) ** (1 - 1 / m) * F
        if not np.all(np.isfinite(U)):
            bad = int(np.flatnonzero(~np.isfinite(U[0]))[0])
            raise IntegrationError(f"non-finite value at node {bad} {self.grid.points[bad]}",
                                   node=bad, point=self.grid.points[bad])
        return Field(self.grid, self.to_u(U[0]))

    def evolve(self, u0: Field, times: np.ndarray | None = None, slopes: bool = True) -> FlowTrace:
        cfg = self.config
        vals = np.asarray(u0.values, dtype=float)
        n = self.grid.n_interior
        if np.any(vals[:n] < cfg.eta):
            bad = int(np.flatnonzero(vals[:n] < cfg.eta)[0])
            raise InputDomainError(
                f"initial data {vals[bad]} below boundary value {cfg.eta} at node {bad} {self.grid.points[bad]}")
        if times is None:
            times = cfg.schedule.times(cfg.t_end)
        trace = FlowTrace(self.grid, cfg)
        U = self.to_state(vals)[None, :].copy()
        self._record(trace, 0.0, U[0], 0, slopes)
        if cfg.t_end < self.cfl_dt(vals):
            return trace
        t, total = 0.0, 0
        for target in times[1:]:
            t, steps = self._march(U, t, target, cfg.max_steps - total)
            total += steps
            if t < target:
                raise IntegrationError(
                    f"step budget {cfg.max_steps} exhausted at t={t:.6g} before {target:.6g}", time=t)
            self._record(trace, t, U[0], total, slopes)
        return trace

    def _record(self, trace, t, state, steps, slopes):
        u = self.to_u(state)
        w = state.copy() if self.config.m != 1 else None
        sl = boundary_slopes(Field(self.grid, w if w is not None else u)) if slopes else {}
        trace.snapshots.append(Snapshot(float(t), u, w, float(np.max(np.abs(u))), int(steps), sl))

    def evolve_pair(self, low: np.ndarray, high: np.ndarray, t_end: float,
                    check_every_step: bool = True):
        """March two data with one shared dt sequence; return the worst ``(low - high)_+``."""
        U = np.vstack([self.to_state(low), self.to_state(high)])
        t, worst, steps = 0.0, 0.0, 0
        chunk = 1 if check_every_step else self.config.max_steps
        while t < t_end:
            t, s = self._march(U, t, t_end, chunk)
            steps += s
            ul, uh = self.to_u(U[0]), self.to_u(U[1])
            worst = max(worst, float(np.max(ul - uh)))
            if s == 0:
                break
        return max(worst, 0.0), steps, (self.to_u(U[0]), self.to_u(U[1]))


_FLOWS: dict = {}


def get_flow(config: FlowConfig, grid: Grid) -> Flow:
    """Cached :class:`Flow` per (config, grid)."""
    key = (config, id(grid))
    fl = _FLOWS.get(key)
    if fl is None or fl.grid is not grid:
        if len(_FLOWS) > 64:
            _FLOWS.clear()
        fl = _FLOWS[key] = Flow(config, grid)
    return fl


def cfl_dt(config: FlowConfig, u: Field) -> float:
    return get_flow(config, u.grid).cfl_dt(u)


def step(config: FlowConfig, u: Field, dt: float) -> Field:
    return get_flow(config, u.grid).step(u, dt)


def evolve(config: FlowConfig, u0: Field) -> FlowTrace:
    return get_flow(config, u0.grid).evolve(u0)


@dataclass
class ComparisonReport:
    worst_violation: float
    steps: int
    tol: float = 1e-12

    @property
    def ok(self) -> bool:
        return self.worst_violation <= self.tol


def comparison_harness(config: FlowConfig, u0_low: Field, u0_high: Field,
                       t_end: float | None = None) -> ComparisonReport:
    """Evolve ordered data with a shared dt sequence and report ordering violations."""
    lo, hi = u0_low.values, u0_high.values
    if np.any(lo > hi):
        bad = int(np.flatnonzero(lo > hi)[0])
        raise InputDomainError(f"initial data not ordered at node {bad}: {lo[bad]} > {hi[bad]}")
    flow = get_flow(config, u0_low.grid)
    worst, steps, _ = flow.evolve_pair(lo, hi, config.t_end if t_end is None else t_end)
    return ComparisonReport(worst, steps)


def first_positivity_times(trace: FlowTrace, threshold: float = 0.0) -> np.ndarray:
    """Per interior node, the first snapshot time with ``u > threshold`` (``inf`` if never)."""
    n = trace.grid.n_interior
    out = np.full(n, np.inf)
    for s in trace.snapshots:
        hit = (s.u[:n] > threshold) & np.isinf(out)
        out[hit] = s.t
    return out


def positivity_time_formula(spec, eta: float) -> float:
    """Printed prediction ``(e - 1) eta^2 / (4 Lambda lambda)`` for the positivity time.

    Reported beside observed times only; its dimensions do not check out.
    """
    return (math.e - 1) / (4 * spec.lambda_high * spec.lambda_low) * eta ** 2


@dataclass
class EtaSweep:
    etas: list
    finals: list
    differences: list
    richardson: list


def eta_sweep(config: FlowConfig, u0: Field, etas=(0.1, 0.05, 0.025, 0.0125)) -> EtaSweep:
    """Run the eta-lifted flow for a decreasing ladder of ``eta``.

    ``u0`` is lifted to ``max(u0, eta)``. ``differences[i]`` is the sup
    distance between the final fields of consecutive levels and
    ``richardson[i]`` the ratio of consecutive differences (about 2 for a
    first-order approach to eta = 0).
    """
    if config.m == 1:
        raise ConfigurationError("eta sweep needs m > 1")
    etas = sorted(etas, reverse=True)
    finals = []
    for eta in etas:
        cfg = config.replace(eta=float(eta))
        vals = np.maximum(u0.values, eta)
        vals[u0.grid.n_interior:] = eta
        tr = Flow(cfg, u0.grid).evolve(Field(u0.grid, vals), times=np.array([0.0, cfg.t_end]),
                                       slopes=False)
        finals.append(tr.snapshots[-1].u)
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(finals, finals[1:])]
    rich = [a / b if b > 0 else math.inf for a, b in zip(diffs, diffs[1:])]
    return EtaSweep(list(etas), finals, diffs, rich)
