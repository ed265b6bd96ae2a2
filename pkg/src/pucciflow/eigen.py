"""Principal eigenpairs from renormalised parabolic flows.

Linear mode (m = 1): ``u_t = F(D^2 u)`` decays like ``exp(-mu t) phi``; the
rate is read off the sup-norm log-slope between snapshots and the profile is
the sup-normalised field.

Sublinear mode (m > 1): ``u_t = F(D^2 u^m)`` decays like
``t^(-1/(m-1)) f``; ``z(t) = t^(1/(m-1)) u(t)`` is compared across time
doublings and converges to ``f`` with ``-F(D^2 f^m) = f/(m-1)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .flow import Flow, FlowConfig, SnapshotSchedule
from .grid import Field, Grid, boundary_slopes
from .matrix_ops import InputDomainError, OperatorKind

log = logging.getLogger(__name__)

BAND_CELLS = 4


class EigenConvergenceError(RuntimeError):
    """The renormalised flow did not settle within its budget."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class EigenResult:
    """Outcome of an eigen solve.

    ``mode`` is ``"linear"`` (``mu`` fitted, profile sup-normalised) or
    ``"sublinear"`` (``mu = 1/(m-1)``, profile is the limit ``f``).
    """

    mode: str
    mu: float
    profile: Field
    m: float = 1.0
    gamma_star: Optional[float] = None
    history: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    residual: float = float("nan")
    residual_bound: float = float("nan")
    t_final: float = 0.0
    steps: int = 0

    @property
    def residual_ok(self) -> bool:
        return self.residual <= self.residual_bound

    def to_json(self) -> dict:
        return {
            "mode": self.mode, "mu": self.mu, "m": self.m, "gamma_star": self.gamma_star,
            "residual": self.residual, "residual_bound": self.residual_bound,
            "t_final": self.t_final, "steps": self.steps,
            "boundary_slopes": self.slopes, "convergence": self.history,
            "grid": self.profile.grid.metadata(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def band_mask(grid: Grid, cells: float = BAND_CELLS) -> np.ndarray:
    """Interior nodes at distance ``>= cells * h`` from the boundary."""
    d = grid.distance()
    mask = d >= cells * grid.h * (1 - 1e-12)
    mask[grid.n_interior:] = False
    return mask


def _config(operator, m, eta=0.0, frames=8, cfl_safety=0.5, t_end=1.0):
    return FlowConfig(operator=operator, m=m, eta=eta, frames=frames, cfl_safety=cfl_safety,
                      t_end=t_end, schedule=SnapshotSchedule("uniform", t_end))


def solve_linear(operator: OperatorKind, grid: Grid, u0: Field, tol_mu: float = 1e-5,
                 tol_profile: float = 1e-4, frames: int = 8, snap_factor: float = 0.5,
                 max_time: float | None = None, flow: Flow | None = None) -> EigenResult:
    """Principal eigenpair of ``-F(D^2 phi) = mu phi`` with zero Dirichlet data."""
    if u0.grid is not grid:
        raise InputDomainError("initial data lives on a different grid")
    vals = np.array(u0.values, dtype=float)
    vals[grid.n_interior:] = 0.0
    if np.any(vals < 0):
        raise InputDomainError("initial data must be nonnegative")
    norm0 = float(np.max(vals))
    if not norm0 > 0:
        raise InputDomainError("initial data is identically zero")
    if flow is None:
        flow = Flow(_config(operator, 1.0, frames=frames), grid)
    dt = flow.base_dt
    U = (vals / norm0)[None, :].copy()
    log_amp = math.log(norm0)
    t = 0.0
    # first chunk: fixed number of steps to get a rate estimate
    chunk = 200 * dt
    history = []
    prev_mu = None
    prev_prof = U[0].copy()
    steps = 0
    if max_time is None:
        max_time = math.inf
    while True:
        t_new, s = flow._march(U, t, t + chunk, 1 << 62)
        steps += s
        nrm = float(np.max(U[0]))
        if not nrm > 0:
            raise EigenConvergenceError("flow collapsed to zero", history)
        mu_hat = -math.log(nrm) / (t_new - t)
        U[0] /= nrm
        log_amp += math.log(nrm)
        t = t_new
        dprof = float(np.max(np.abs(U[0] - prev_prof)))
        dmu = abs(mu_hat - prev_mu) if prev_mu is not None else math.inf
        history.append({"t": t, "mu": mu_hat, "dmu": dmu, "dprofile": dprof})
        if dmu < tol_mu and dprof < tol_profile:
            break
        if t > max_time:
            raise EigenConvergenceError(
                f"no convergence by t={t:.4g}: last mu {mu_hat:.8g}, dmu {dmu:.3g}, dprofile {dprof:.3g}",
                history)
        if mu_hat > 0:
            chunk = max(snap_factor / mu_hat, 50 * dt)
        prev_mu, prev_prof = mu_hat, U[0].copy()
    profile = Field(grid, U[0].copy())
    gamma = math.exp(log_amp + mu_hat * t)
    # the log-slope carries the O(dt) bias of forward Euler; the Rayleigh quotient of
    # the converged profile is the eigenvalue of the spatial scheme
    F = flow.op.apply_values(profile.values)
    phi = profile.interior
    mu_hat = float(-(F @ phi) / (phi @ phi))
    res = EigenResult("linear", mu_hat, profile, 1.0, gamma, history, t_final=t, steps=steps)
    band = band_mask(grid)
    if np.any(band):
        r = F + mu_hat * profile.interior
        res.residual = float(np.max(np.abs(r[band[: grid.n_interior]])))
    res.residual_bound = 10 * (grid.h ** 2 + tol_mu) * mu_hat
    res.slopes = boundary_slopes(profile)
    return res


def solve_sublinear(operator: OperatorKind, grid: Grid, m: float, u0: Field,
                    tol_profile: float = 1e-4, t_first: float = 1.0, ratio: float = 2.0,
                    max_doublings: int = 40, frames: int = 8,
                    flow: Flow | None = None) -> EigenResult:
    """Profile ``f`` with ``-F(D^2 f^m) = f/(m-1)`` as the limit of ``t^(1/(m-1)) u``."""
    if not m > 1:
        raise InputDomainError(f"sublinear mode needs m > 1, got {m}")
    if u0.grid is not grid:
        raise InputDomainError("initial data lives on a different grid")
    vals = np.array(u0.values, dtype=float)
    vals[grid.n_interior:] = 0.0
    if np.any(vals < 0):
        raise InputDomainError("initial data must be nonnegative")
    if not np.max(vals) > 0:
        raise InputDomainError("initial data is identically zero")
    dist = grid.distance()[: grid.n_interior]
    ratio_cb = vals[: grid.n_interior] ** m / dist
    if not (ratio_cb.min() > 0 and np.isfinite(ratio_cb.max())):
        log.warning("u0**m is not comparable to the distance function; convergence may be slow")
    if flow is None:
        flow = Flow(_config(operator, m, frames=frames), grid)
    U = flow.to_state(vals)[None, :].copy()
    expo = 1.0 / (m - 1)
    t, steps = 0.0, 0
    target = t_first
    history = []
    z_prev = None
    for _ in range(max_doublings):
        t, s = flow._march(U, t, target, 1 << 62)
        steps += s
        z = target ** expo * flow.to_u(U[0])
        if z_prev is not None:
            diff = float(np.max(np.abs(z - z_prev)))
            history.append({"t": t, "dz": diff, "sup_u": float(np.max(flow.to_u(U[0])))})
            if diff < tol_profile:
                break
        else:
            history.append({"t": t, "dz": math.inf, "sup_u": float(np.max(flow.to_u(U[0])))})
        z_prev = z
        target *= ratio
    else:
        raise EigenConvergenceError(
            f"no convergence after {max_doublings} doublings (t={t:.4g}), "
            f"last difference {history[-1]['dz']:.3g}", history)
    f = Field(grid, z)
    res = EigenResult("sublinear", expo, f, m, None, history, t_final=t, steps=steps)
    band = band_mask(grid)
    if np.any(band):
        F = flow.op.apply_values(f.values ** m)
        r = F + f.interior / (m - 1)
        res.residual = float(np.max(np.abs(r[band[: grid.n_interior]])))
    res.residual_bound = 10 * (grid.h ** 2 + tol_profile) / (m - 1)
    res.slopes = boundary_slopes(Field(grid, f.values ** m))
    return res


class HopfSlopes(NamedTuple):
    min: float
    max: float
    skipped: int
    flagged: int


def hopf_slope(profile: Field) -> HopfSlopes:
    """Extremes of the inward normal slope over boundary nodes."""
    if np.any(profile.values < 0):
        raise InputDomainError("profile must be nonnegative")
    s = boundary_slopes(profile)
    return HopfSlopes(s["min"], s["max"], s["skipped"], s["flagged_near_vertex"])


@dataclass
class UniquenessReport:
    mode: str
    difference: float
    tol: float
    results: tuple

    @property
    def ok(self) -> bool:
        return self.difference <= self.tol


def uniqueness_probe(operator: OperatorKind, grid: Grid, mode: str, u0_a: Field, u0_b: Field,
                     m: float = 2.0, tol: float = 1e-3, **kw) -> UniquenessReport:
    """Solve from two initial data and compare the limiting profiles."""
    if mode == "linear":
        ra = solve_linear(operator, grid, u0_a, **kw)
        rb = solve_linear(operator, grid, u0_b, **kw)
    elif mode == "sublinear":
        ra = solve_sublinear(operator, grid, m, u0_a, **kw)
        rb = solve_sublinear(operator, grid, m, u0_b, **kw)
    else:
        raise InputDomainError(f"mode must be linear or sublinear, got {mode!r}")
    diff = float(np.max(np.abs(ra.profile.values - rb.profile.values)))
    return UniquenessReport(mode, diff, tol, (ra, rb))
