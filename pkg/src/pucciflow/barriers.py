"""Closed-form sub- and supersolutions sampled onto grids.

Four families:

* ``heat_kernel``: ``g = c0 (t+tau)^(-beta) exp(-alpha r^2/(t+tau))`` with
  ``alpha = 1/(4 lambda)``, ``beta = Lambda n/(2 lambda)``; a subsolution of
  ``M^-(D^2 u) = u_t`` on all of space.
* ``truncated_heat``: ``max(g - delta0, 0)``, compactly supported.
* ``barenblatt``: ``V = t^(-alpha) (c - k r^2/t^beta)_+`` for the pressure,
  turned into ``U = ((m-1)/m V)^(1/(m-1))`` for ``u_t = M^-(D^2 u^m)``.
* ``separable``: ``K phi e^(-mu t)`` (m = 1) or ``f (K+t)^(-1/(m-1))`` (m > 1)
  from a discrete eigenprofile; exact for the flow the profile came from.

Time derivatives are analytic so residuals measure spatial error only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .flow import Flow, FlowConfig
from .grid import Field, Grid
from .matrix_ops import EllipticitySpec, InputDomainError, OperatorKind
from .stencil import DiscreteOperator

KINDS = ("heat_kernel", "truncated_heat", "barenblatt", "separable")

# 2 * max over the calibration ladder of |scaled residual|/h^2 for the 2D
# lambda = Lambda heat kernel (1.83 at h = 1/32); reproduced by calibrate_c_cons()
C_CONS = 3.7


class DomainViolationError(InputDomainError):
    """A subsolution's support leaves the domain."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


def heat_exponents(spec: EllipticitySpec, n: int):
    """``(alpha, beta)`` of the heat-kernel subsolution."""
    lam, Lam = spec.lambda_low, spec.lambda_high
    return 1.0 / (4 * lam), Lam * n / (2 * lam)


def barenblatt_exponents(spec: EllipticitySpec, n: int, m: float, exact: bool = False):
    """``(alpha, beta, k)``; with ``exact`` the values are Fractions of the float inputs."""
    conv = Fraction if exact else float
    lam, Lam, m = conv(spec.lambda_low), conv(spec.lambda_high), conv(m)
    den = 2 * lam + n * (m - 1) * Lam
    return n * (m - 1) * Lam / den, 2 * lam / den, 1 / (2 * den)


@dataclass(frozen=True)
class BarrierSpec:
    """Parameters of one barrier family (see module docstring)."""

    kind: str
    spec: EllipticitySpec = EllipticitySpec()
    m: float = 1.0
    dim: int = 1
    center: Optional[tuple] = None
    c0: float = 1.0
    tau: float = 0.0
    delta0: float = 0.0
    c: float = 1.0
    K: float = 1.0
    profile: Optional[Field] = field(default=None, compare=False)
    mu: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputDomainError(f"barrier kind must be one of {KINDS}, got {self.kind!r}")
        if self.m < 1:
            raise InputDomainError(f"m must be >= 1, got {self.m}")
        if self.kind == "barenblatt" and not self.m > 1:
            raise InputDomainError("barenblatt barrier needs m > 1")
        if self.kind == "truncated_heat" and not (self.delta0 > 0 and self.c0 > self.delta0):
            raise InputDomainError(f"need c0 > delta0 > 0, got c0={self.c0}, delta0={self.delta0}")
        if self.kind == "separable":
            if self.profile is None:
                raise InputDomainError("separable barrier needs a profile")
            if self.m == 1 and self.mu is None:
                raise InputDomainError("separable barrier with m = 1 needs mu")
            if not self.K > 0:
                raise InputDomainError(f"K must be positive, got {self.K}")
        if self.kind == "barenblatt" and not self.c > 0:
            raise InputDomainError(f"c must be positive, got {self.c}")
        if self.tau < 0:
            raise InputDomainError(f"tau must be >= 0, got {self.tau}")

    @property
    def is_sub(self) -> bool:
        return self.kind != "separable"

    def exponents(self):
        if self.kind in ("heat_kernel", "truncated_heat"):
            return heat_exponents(self.spec, self.dim)
        if self.kind == "barenblatt":
            return barenblatt_exponents(self.spec, self.dim, self.m)
        return ()

    def support_radius(self, t: float) -> float:
        """Radius of ``{b > 0}`` around the centre (``inf`` for the plain kernel)."""
        s = t + self.tau
        if self.kind == "heat_kernel":
            return math.inf
        if self.kind == "truncated_heat":
            a, b = heat_exponents(self.spec, self.dim)
            arg = math.log(self.c0 / self.delta0) - b * math.log(s)
            return math.sqrt(s * arg / a) if arg > 0 else 0.0
        if self.kind == "barenblatt":
            _, b, k = barenblatt_exponents(self.spec, self.dim, self.m)
            return math.sqrt(self.c * s ** b / k)
        return math.inf

    def growth_limit(self) -> float:
        """Last time at which the truncated kernel's support still grows."""
        if self.kind != "truncated_heat":
            raise InputDomainError("growth limit is defined for truncated_heat only")
        _, b = heat_exponents(self.spec, self.dim)
        return math.exp(-1) * (self.c0 / self.delta0) ** (1 / b) - self.tau


def _center(bs: BarrierSpec, grid: Grid) -> np.ndarray:
    if bs.center is not None:
        return np.asarray(bs.center, dtype=float)
    lo, hi = grid.domain.bbox()
    return 0.5 * (np.asarray(lo, float) + np.asarray(hi, float))


def _r2(bs: BarrierSpec, grid: Grid) -> np.ndarray:
    d = grid.points - _center(bs, grid)
    return np.sum(d * d, axis=1)


def _eval(bs: BarrierSpec, grid: Grid, t: float):
    """``(u, u_t, state)``; ``state`` is the argument of ``F`` (``u`` or ``u^m``)."""
    s = t + bs.tau
    if bs.kind in ("heat_kernel", "truncated_heat"):
        if not s > 0:
            raise InputDomainError(f"heat-kernel barriers need t + tau > 0, got {s}")
        a, b = heat_exponents(bs.spec, bs.dim)
        r2 = _r2(bs, grid)
        g = bs.c0 * s ** (-b) * np.exp(-a * r2 / s)
        gt = g * (-b / s + a * r2 / s ** 2)
        if bs.kind == "truncated_heat":
            pos = g > bs.delta0
            g = np.where(pos, g - bs.delta0, 0.0)
            gt = np.where(pos, gt, 0.0)
        return g, gt, g
    if bs.kind == "barenblatt":
        if not s > 0:
            raise InputDomainError(f"barenblatt barrier needs t + tau > 0, got {s}")
        a, b, k = barenblatt_exponents(bs.spec, bs.dim, bs.m)
        m = bs.m
        r2 = _r2(bs, grid)
        inner = bs.c - k * r2 / s ** b
        pos = inner > 0
        V = np.where(pos, s ** (-a) * inner, 0.0)
        Vt = np.where(pos, -a * s ** (-a - 1) * inner + s ** (-a) * k * b * r2 * s ** (-b - 1), 0.0)
        q = 1.0 / (m - 1)
        base = (m - 1) / m * V
        U = base ** q
        with np.errstate(divide="ignore", invalid="ignore"):
            Ut = np.where(pos, q * base ** (q - 1) * (m - 1) / m * Vt, 0.0)
        return U, Ut, U ** m
    prof = bs.profile.values
    if prof.shape != (grid.n_nodes,):
        raise InputDomainError("separable profile lives on a different grid")
    if bs.m == 1:
        e = bs.K * math.exp(-bs.mu * t)
        return e * prof, -bs.mu * e * prof, e * prof
    q = 1.0 / (bs.m - 1)
    e = (bs.K + t) ** (-q)
    u = e * prof
    return u, -q * u / (bs.K + t), u ** bs.m


def _check_support(bs: BarrierSpec, grid: Grid, t: float):
    if bs.kind not in ("truncated_heat", "barenblatt"):
        return
    R = bs.support_radius(t)
    room = float(grid.domain.distance(_center(bs, grid)[None, :])[0])
    if R > room * (1 + 1e-12):
        raise DomainViolationError(
            f"{bs.kind} support radius {R:.6g} at t={t:.6g} exceeds the distance {room:.6g} "
            f"from its centre to the boundary", radius=R)


def sample(bs: BarrierSpec, grid: Grid, t: float) -> Field:
    """Barrier values at every grid node at time ``t``.

    For ``barenblatt`` the returned field is ``U``; the pressure ``V`` is in
    ``meta["pressure"]``.
    """
    _check_support(bs, grid, t)
    u, _, _ = _eval(bs, grid, t)
    f = Field(grid, u, {"kind": bs.kind, "t": t})
    if bs.kind == "barenblatt":
        f.meta["pressure"] = bs.m / (bs.m - 1) * u ** (bs.m - 1)
    return f


@dataclass
class ResidualReport:
    """Worst scaled residual ``(F_h(state) - u_t) / scale(t)`` over a time window."""

    kind: str
    sign: str
    worst: float
    worst_node: int
    worst_point: tuple
    worst_time: float
    max_abs: float
    h: float
    threshold: float
    nodes_checked: int

    @property
    def ok(self) -> bool:
        if self.sign == "sub":
            return self.worst >= -self.threshold
        if self.sign == "super":
            return self.worst <= self.threshold
        return self.max_abs <= self.threshold

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["worst_point"] = [float(x) for x in self.worst_point]
        d["ok"] = self.ok
        return d


def _inner_nodes(bs: BarrierSpec, grid: Grid, op: DiscreteOperator, t: float) -> np.ndarray:
    """Interior nodes whose whole stencil lies strictly inside the barrier's support."""
    n = grid.n_interior
    if bs.kind in ("heat_kernel", "separable"):
        return np.ones(n, dtype=bool)
    R = bs.support_radius(t)
    reach = op.stencils.radius * grid.h * math.sqrt(grid.dim) + grid.h
    r = np.sqrt(_r2(bs, grid)[:n])
    return r + reach < R


def residual_check(bs: BarrierSpec, grid: Grid, window: tuple, sign: str = "sub",
                   operator: OperatorKind | None = None, n_times: int = 9,
                   c_cons: float = C_CONS, tol: float | None = None,
                   frames: int = 8) -> ResidualReport:
    """Discrete residual of the barrier across ``n_times`` times in ``window``.

    The residual ``F_h(state) - u_t`` is divided by ``scale(t) = max |u_t|``
    over the checked nodes so that the threshold ``c_cons * h^2`` is free of
    the barrier's amplitude. ``sign`` is ``sub`` (assert ``>= -thr``),
    ``super`` (``<= thr``) or ``exact`` (``|.| <= thr``). ``tol`` overrides the
    threshold.
    """
    if sign not in ("sub", "super", "exact"):
        raise InputDomainError(f"sign must be sub, super or exact, got {sign!r}")
    if operator is None:
        operator = OperatorKind("pucci_minus", bs.spec)
    from .stencil import StencilSet
    op = DiscreteOperator(operator, grid, StencilSet.build(grid.dim, frames))
    t0, t1 = window
    times = np.linspace(t0, t1, n_times) if n_times > 1 else np.array([t0])
    n = grid.n_interior
    worst = -math.inf if sign == "super" else math.inf
    wnode, wtime, max_abs, checked = -1, t0, 0.0, 0
    for t in times:
        _check_support(bs, grid, t)
        u, ut, state = _eval(bs, grid, t)
        mask = _inner_nodes(bs, grid, op, t)
        if not np.any(mask):
            continue
        res = op.apply_values(state) - ut[:n]
        scale = float(np.max(np.abs(ut[:n][mask]))) if tol is None else 1.0
        if not scale > 0:
            continue
        res = np.where(mask, res / scale, np.nan)
        checked += int(mask.sum())
        max_abs = max(max_abs, float(np.nanmax(np.abs(res))))
        if sign == "super":
            k = int(np.nanargmax(res))
            if res[k] > worst:
                worst, wnode, wtime = float(res[k]), k, float(t)
        else:
            k = int(np.nanargmin(res)) if sign == "sub" else int(np.nanargmax(np.abs(res)))
            val = float(res[k])
            if (sign == "sub" and val < worst) or (sign == "exact" and (wnode < 0 or abs(val) > abs(worst))):
                worst, wnode, wtime = val, k, float(t)
    thr = c_cons * grid.h ** 2 if tol is None else tol
    pt = tuple(grid.points[wnode]) if wnode >= 0 else ()
    return ResidualReport(bs.kind, sign, worst, wnode, pt, wtime, max_abs, grid.h, thr, checked)


CALIBRATION_LADDER = (1 / 8, 1 / 16, 1 / 32)
CALIBRATION_WINDOW = (0.25, 1.0)


def calibration_barrier(dim: int = 2) -> tuple:
    """Heat kernel with ``lambda = Lambda = 1`` centred in ``(0,4)^dim``."""
    from .grid import Interval, Rectangle
    dom = Interval(4.0) if dim == 1 else Rectangle(4.0, 4.0)
    bs = BarrierSpec("heat_kernel", EllipticitySpec(1.0, 1.0), dim=dim)
    return dom, bs


def calibrate_c_cons(ladder=CALIBRATION_LADDER, window=CALIBRATION_WINDOW, dim: int = 2,
                     safety: float = 2.0):
    """``(safety * max_h |residual|/h^2, per-level ratios)`` on the calibration kernel."""
    from .grid import build_grid
    dom, bs = calibration_barrier(dim)
    ratios = []
    for h in ladder:
        g = build_grid(dom, h)
        rep = residual_check(bs, g, window, "exact", c_cons=1.0)
        ratios.append(rep.max_abs / h ** 2)
    return safety * max(ratios), ratios


@dataclass
class SandwichReport:
    worst_below: float
    worst_above: float
    times: list
    rtol: float

    @property
    def ok(self) -> bool:
        return self.worst_below <= self.rtol and self.worst_above <= self.rtol


def sandwich_run(low: BarrierSpec, high: BarrierSpec, config: FlowConfig, u0: Field,
                 rtol: float = 5e-3, flow: Flow | None = None) -> SandwichReport:
    """Evolve ``u0`` and measure how far it leaves ``[low, high]`` at each snapshot.

    Excursions are relative to ``max(sup low, sup high)`` at that time.
    """
    grid = u0.grid
    lo0, hi0 = sample(low, grid, 0.0).values, sample(high, grid, 0.0).values
    v = u0.values
    scale0 = max(np.max(np.abs(lo0)), np.max(np.abs(hi0)))
    bad = (lo0 - v > rtol * scale0) | (v - hi0 > rtol * scale0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InputDomainError(
            f"initial data not between the barriers at node {k} {grid.points[k]}: "
            f"{lo0[k]} <= {v[k]} <= {hi0[k]} fails")
    if flow is None:
        flow = Flow(config, grid)
    trace = flow.evolve(u0, slopes=False)
    below = above = 0.0
    for s in trace.snapshots:
        lo = sample(low, grid, s.t).values
        hi = sample(high, grid, s.t).values
        scale = max(np.max(np.abs(lo)), np.max(np.abs(hi)))
        below = max(below, float(np.max(lo - s.u)) / scale)
        above = max(above, float(np.max(s.u - hi)) / scale)
    return SandwichReport(max(below, 0.0), max(above, 0.0), list(trace.times), rtol)
