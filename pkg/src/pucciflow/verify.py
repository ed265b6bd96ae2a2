"""Named verification experiments.

The registry maps a name to a procedure key plus its parameters; the same
records drive the acceptance suite and the ``experiment`` CLI subcommand.
Every outcome carries the measured value beside its threshold.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import barriers as bar
from .eigen import band_mask, solve_linear, solve_sublinear, uniqueness_probe
from .flow import Flow, FlowConfig, FlowTrace, Snapshot, SnapshotSchedule, comparison_harness
from .geometry import LOG, Transform, eventual_concavity_probe, midpoint_concavity
from .grid import Field, Grid, Interval, Rectangle, build_grid, distance_field
from .matrix_ops import ConfigurationError, EllipticitySpec, InputDomainError, OperatorKind, SymMatrix


class UnknownExperimentError(ConfigurationError):
    pass


# -- oracles -------------------------------------------------------------------------


def _coef_negative(variant: str, spec: EllipticitySpec) -> float:
    """Coefficient of a negative second derivative in the 1D operator."""
    return {"laplacian": 1.0, "pucci_minus": spec.lambda_high,
            "pucci_plus": spec.lambda_low}[variant]


def _inverse_1d(variant: str, spec: EllipticitySpec, y: float) -> float:
    """The ``s`` with ``F(s) = y`` for the 1D operator ``F``."""
    lam, Lam = spec.lambda_low, spec.lambda_high
    if variant == "laplacian":
        return y
    if variant == "pucci_minus":
        return y / Lam if y < 0 else y / lam
    return y / lam if y < 0 else y / Lam


def shooting_linear_1d(variant: str, spec: EllipticitySpec, length: float,
                       bracket=(1e-3, 50.0)):
    """Principal pair of ``-F(phi'') = mu phi`` on ``(0, L)`` by shooting on ``mu``.

    Returns ``(mu, profile(x), max phi'')``; ``max phi'' < 0`` certifies the
    concave branch of the operator was the one used throughout.
    """
    def rhs(x, y, mu):
        return [y[1], _inverse_1d(variant, spec, -mu * y[0])]

    def end_value(mu):
        sol = solve_ivp(rhs, (0, length), [0.0, 1.0], args=(mu,), rtol=1e-11, atol=1e-13)
        return sol.y[0, -1]

    mu = brentq(end_value, *_first_sign_change(end_value, *bracket), xtol=1e-13)
    sol = solve_ivp(rhs, (0, length), [0.0, 1.0], args=(mu,), rtol=1e-11, atol=1e-13,
                    dense_output=True)
    xs = np.linspace(0, length, 2001)[1:-1]
    ys = sol.sol(xs)[0]
    d2 = np.array([_inverse_1d(variant, spec, -mu * v) for v in ys])
    peak = float(np.max(ys))

    def profile(x):
        return np.where((x > 0) & (x < length), sol.sol(np.clip(x, 0, length))[0] / peak, 0.0)

    return mu, profile, float(np.max(d2))


def _first_sign_change(fn, lo, hi, n=400):
    xs = np.geomspace(lo, hi, n)
    vals = [fn(x) for x in xs]
    for a, b, fa, fb in zip(xs, xs[1:], vals, vals[1:]):
        if fa == 0 or fa * fb < 0:
            return a, b
    raise InputDomainError(f"no sign change of the shooting function in [{lo}, {hi}]")


def shooting_sublinear_1d(m: float, length: float = 1.0, coef: float = 1.0):
    """Positive ``f`` with ``-coef (f^m)'' = f/(m-1)``, ``f(0) = f(L) = 0``.

    Shoots on ``g = f^m`` with ``g(0) = 0``, ``g'(0) = s`` and solves for the
    slope ``s`` whose first zero lands at ``L``. Returns a callable ``f(x)``.
    """
    def rhs(x, y):
        return [y[1], -max(y[0], 0.0) ** (1 / m) / ((m - 1) * coef)]

    def hit(x, y):
        return y[0]
    hit.terminal = True
    hit.direction = -1

    def first_zero(s):
        sol = solve_ivp(rhs, (0, 50 * length), [0.0, s], events=hit, rtol=1e-11, atol=1e-14,
                        first_step=1e-6)
        ev = [e for e in sol.t_events[0] if e > 1e-9]
        return (ev[0] if ev else math.inf) - length

    s = brentq(first_zero, *_first_sign_change(first_zero, 1e-6, 1e3), xtol=1e-14)
    sol = solve_ivp(rhs, (0, length), [0.0, s], rtol=1e-11, atol=1e-14, dense_output=True,
                    first_step=1e-6)

    def f(x):
        g = sol.sol(np.clip(x, 0, length))[0]
        return np.where((x > 0) & (x < length), np.maximum(g, 0.0) ** (1 / m), 0.0)

    return f


# -- trace statistics ------------------------------------------------------------------


@dataclass
class DecayFit:
    rate: float
    slope: float
    max_residual: float
    n_points: int


def decay_fit(trace: FlowTrace, mode: str = "linear") -> DecayFit:
    """Least-squares decay fit over the final third (in time) of the trace.

    ``linear``: slope of ``log ||u||`` against ``t`` (rate = ``-slope``).
    ``sublinear``: slope against ``log t``.
    """
    t = trace.times
    sup = trace.sup_norms
    if len(t) == 0:
        raise InputDomainError("empty trace")
    sel = (t >= t[-1] * 2 / 3) & (t > 0) & (sup > 0)
    if sel.sum() < 8:
        raise InputDomainError(f"decay fit needs >= 8 snapshots in the final third, got {int(sel.sum())}")
    x = t[sel] if mode == "linear" else np.log(t[sel])
    if mode not in ("linear", "sublinear"):
        raise InputDomainError(f"mode must be linear or sublinear, got {mode!r}")
    y = np.log(sup[sel])
    if np.ptp(x) == 0:
        raise InputDomainError("degenerate fit window")
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.max(np.abs(y - (slope * x + icpt))))
    return DecayFit(-slope, float(slope), res, int(sel.sum()))


@dataclass
class ABReport:
    c_star_w: float
    c_star_v: float
    worst_point: tuple
    worst_time: float
    excluded: int
    evaluated: int


def ab_constant(trace: FlowTrace, window=None, band_cells: float = 4) -> ABReport:
    """Empirical ``C* = max(-t w_t / w)`` over band nodes and the time window.

    ``w_t`` is a centred difference of adjacent snapshots; the first snapshot
    is never a centre. Nodes with ``w = 0`` are excluded and counted. The
    ``v = u^(m-1)`` version is reported alongside.
    """
    m = trace.config.m
    if not m > 1:
        raise InputDomainError("AB constant needs m > 1")
    ts = trace.times
    band = band_mask(trace.grid, band_cells)
    if window is None:
        window = (ts[1] if len(ts) > 1 else 0.0, ts[-1])
    cw = cv = -math.inf
    wp, wt = (), float("nan")
    excluded = evaluated = 0
    for i in range(2, len(ts) - 1):
        t = ts[i]
        if t < window[0] - 1e-12 or t > window[1] + 1e-12:
            continue
        dt = ts[i + 1] - ts[i - 1]
        w = trace.w(i).values[band]
        pos = w > 0
        excluded += int((~pos).sum())
        evaluated += int(pos.sum())
        wtd = (trace.w(i + 1).values[band] - trace.w(i - 1).values[band]) / dt
        u0, u1, u2 = (trace.snapshots[j].u[band] for j in (i - 1, i, i + 1))
        v, vtd = u1 ** (m - 1), (u2 ** (m - 1) - u0 ** (m - 1)) / dt
        with np.errstate(divide="ignore", invalid="ignore"):
            qw = np.where(pos, -t * wtd / w, -np.inf)
            qv = np.where(pos, -t * vtd / v, -np.inf)
        k = int(np.argmax(qw))
        if qw[k] > cw:
            cw = float(qw[k])
            wp, wt = tuple(trace.grid.points[np.flatnonzero(band)[k]]), float(t)
        cv = max(cv, float(np.max(qv)))
    if evaluated == 0:
        raise InputDomainError("no positive band nodes inside the AB window")
    return ABReport(cw, cv, wp, wt, excluded, evaluated)


def synthetic_trace(grid: Grid, config: FlowConfig, times, fn) -> FlowTrace:
    """Trace whose snapshot at ``t`` holds ``fn(t)`` (node values of ``u``)."""
    tr = FlowTrace(grid, config)
    m = config.m
    for t in times:
        u = np.asarray(fn(t), dtype=float)
        tr.snapshots.append(Snapshot(float(t), u, u ** m if m != 1 else None,
                                     float(np.max(np.abs(u))), 0, {}))
    return tr


# -- experiment plumbing ---------------------------------------------------------------


@dataclass
class Check:
    label: str
    anchor: str
    measured: float
    threshold: float
    relation: str  # "<=" or ">="

    @property
    def passed(self) -> bool:
        if isinstance(self.measured, float) and math.isnan(self.measured):
            return False
        return self.measured <= self.threshold if self.relation == "<=" else self.measured >= self.threshold

    def to_json(self):
        return {"label": self.label, "anchor": self.anchor, "measured": self.measured,
                "threshold": self.threshold, "relation": self.relation, "passed": self.passed}


@dataclass
class Outcome:
    name: str
    description: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "passed": self.passed,
                "wall_time": self.wall_time, "checks": [c.to_json() for c in self.checks],
                "info": self.info}

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{c.label}={c.measured:.4g}{c.relation}{c.threshold:.4g}" for c in self.checks)
        return f"{tag} {self.name} ({self.wall_time:.1f}s): {parts}"


def _op(variant, lam=1.0, Lam=1.0):
    return OperatorKind(variant, EllipticitySpec(lam, Lam))


def _profile_error(profile: Field, exact) -> float:
    g = profile.grid
    ref = np.asarray(exact(*[g.points[:, k] for k in range(g.dim)]), dtype=float)
    return float(np.max(np.abs(profile.values - ref)))


def _proc_linear_1d(p, out: Outcome):
    L = p["length"]
    g = build_grid(Interval(L), L / p["cells"])
    spec = EllipticitySpec(p["lambda_low"], p["lambda_high"])
    sin = lambda x: np.sin(np.pi * x / L)
    for variant, target, check_profile in p["runs"]:
        r = solve_linear(OperatorKind(variant, spec), g, distance_field(g))
        mu_o, prof_o, d2max = shooting_linear_1d(variant, spec, L)
        out.info[variant] = {"mu": r.mu, "mu_shooting": mu_o, "shooting_max_d2": d2max,
                             "gamma_star": r.gamma_star, "residual": r.residual,
                             "hopf_min_slope": r.slopes.get("min")}
        out.checks.append(Check(f"{variant}.mu_rel_err", "principal eigenvalue",
                                abs(r.mu - target) / target, 0.01, "<="))
        out.checks.append(Check(f"{variant}.shooting_rel_err", "shooting oracle",
                                abs(mu_o - target) / target, 1e-6, "<="))
        out.checks.append(Check(f"{variant}.shooting_max_d2", "concave branch certificate",
                                d2max, 0.0, "<="))
        if check_profile:
            out.checks.append(Check(f"{variant}.profile_err", "eigenprofile",
                                    _profile_error(r.profile, sin), 5e-3, "<="))
        out.checks.append(Check(f"{variant}.residual_margin", "eigen residual",
                                r.residual_bound - r.residual, 0.0, ">="))


def _proc_scaling(p, out: Outcome):
    op = _op(p["variant"], p["lambda_low"], p["lambda_high"])
    mus = []
    for L in (p["length"], p["length"] / 2):
        g = build_grid(Interval(L), L / p["cells"])
        mus.append(solve_linear(op, g, distance_field(g)).mu)
    ratio = mus[1] / mus[0]
    out.info.update(mu_full=mus[0], mu_half=mus[1], ratio=ratio)
    out.checks.append(Check("ratio_rel_err", "parabolic scaling", abs(ratio - 4) / 4, 0.02, "<="))


def _proc_logconc_2d(p, out: Outcome):
    g = build_grid(Rectangle(p["lx"], p["ly"]), p["h"])
    op = _op(p["variant"], p["lambda_low"], p["lambda_high"])
    u0 = Field.from_function(g, lambda x, y: np.sin(np.pi * x / p["lx"]) * np.sin(np.pi * y / p["ly"]))
    r = solve_linear(op, g, u0)
    rep = midpoint_concavity(r.profile, LOG, p["band"])
    out.info.update(mu=r.mu, triples=rep.count, worst_triple=[list(map(float, q)) for q in rep.worst_triple])
    out.checks.append(Check("worst_log_second_difference", "log-concave eigenfield",
                            rep.worst, rep.tol, "<="))


def _sublinear_1d(p):
    g = build_grid(Interval(p["length"]), p["length"] / p["cells"])
    m = p["m"]
    u0 = Field(g, distance_field(g).values ** (1 / m))
    r = solve_sublinear(_op("laplacian"), g, m, u0)
    return g, u0, r


def _proc_sublinear_1d(p, out: Outcome):
    g, u0, r = _sublinear_1d(p)
    m = p["m"]
    exact = shooting_sublinear_1d(m, p["length"])
    err = _profile_error(r.profile, exact)
    cfg = FlowConfig(_op("laplacian"), m=m, t_end=p["fit_t_end"],
                     schedule=SnapshotSchedule("uniform", p["fit_t_end"] / 48))
    tr = Flow(cfg, g).evolve(u0, slopes=False)
    fit = decay_fit(tr, "sublinear")
    target = -1 / (m - 1)
    out.info.update(t_final=r.t_final, last_dz=r.history[-1]["dz"], steps=r.steps,
                    slope=fit.slope, fit_residual=fit.max_residual)
    out.checks.append(Check("doubling_difference", "renormalised limit", r.history[-1]["dz"], 1e-4, "<="))
    out.checks.append(Check("profile_vs_shooting", "sublinear eigenprofile", err, 1e-2, "<="))
    out.checks.append(Check("loglog_slope_rel_err", "algebraic decay",
                            abs(fit.slope - target) / abs(target), 0.02, "<="))


def _proc_sqrtconc(p, out: Outcome):
    m = p["m"]
    tf = Transform("power", (m - 1) / 2)
    _, _, r1 = _sublinear_1d(p)
    rep1 = midpoint_concavity(r1.profile, tf, p["band"])
    g2 = build_grid(Rectangle(1.0, 1.0), p["h2"])
    u0 = Field(g2, distance_field(g2).values ** (1 / m))
    r2 = solve_sublinear(_op("pucci_minus", p["lambda_low"], p["lambda_high"]), g2, m, u0)
    rep2 = midpoint_concavity(r2.profile, tf, p["band"])
    out.info.update(t_final_2d=r2.t_final, dz_2d=r2.history[-1]["dz"], triples_1d=rep1.count,
                    triples_2d=rep2.count)
    out.checks.append(Check("worst_1d", "square-root concave profile", rep1.worst, rep1.tol, "<="))
    out.checks.append(Check("worst_2d", "square-root concave profile", rep2.worst, rep2.tol, "<="))


def _proc_ab(p, out: Outcome):
    m = p["m"]
    g = build_grid(Interval(p["length"]), p["length"] / p["cells"])
    ta, tb = p["window"]
    d = p["snap_dt"]
    times = np.concatenate([[0.0], np.arange(ta - d, tb + 1.5 * d, d)])
    cfg = FlowConfig(_op("laplacian"), m=m, t_end=float(times[-1]))
    u0 = Field(g, distance_field(g).values ** (1 / m))
    tr = Flow(cfg, g).evolve(u0, times=times, slopes=False)
    rep = ab_constant(tr, (ta, tb))
    out.checks.append(Check("C_star_canonical", "one-sided time bound",
                            rep.c_star_w, m / (m - 1) + 0.5, "<="))
    # closed-form separable trace
    tau = p["tau"]
    f = shooting_sublinear_1d(m, p["length"])(g.points[:, 0])
    ds = p["synthetic_dt"]
    ts = np.concatenate([[0.0], np.arange(ta - ds, tb + 1.5 * ds, ds)])
    syn = synthetic_trace(g, cfg, ts, lambda t: f * (tau + t) ** (-1 / (m - 1)))
    srep = ab_constant(syn, (ta, tb))
    bound = m / (m - 1) * tb / (tau + tb)
    out.info.update(C_star_canonical=rep.c_star_w, C_star_v=rep.c_star_v, excluded=rep.excluded,
                    C_star_separable=srep.c_star_w, separable_bound=bound)
    out.checks.append(Check("separable_excess", "separable closed form",
                            srep.c_star_w - bound, 1e-6, "<="))


def _random_pair(rng, g: Grid):
    n = g.n_interior
    lo = np.zeros(g.n_nodes)
    hi = np.zeros(g.n_nodes)
    lo[:n] = rng.uniform(0, 1, n)
    hi[:n] = lo[:n] + rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.7)
    return Field(g, lo), Field(g, hi)


def _proc_comparison(p, out: Outcome):
    rng = np.random.default_rng(p["seed"])
    grids = [build_grid(Interval(1.0), p["h1"]), build_grid(Rectangle(1.0, 1.0), p["h2"])]
    bell = OperatorKind("bellman_inf", EllipticitySpec(1.0, 2.0),
                        (SymMatrix.from_upper([1.0, 0.0, 1.0]), SymMatrix.from_upper([1.5, 0.3, 1.4])))
    variants = ["laplacian", "pucci_minus", "pucci_plus", "bellman_inf"]
    worst, total = 0.0, 0
    for i in range(p["pairs"]):
        m = (1.0, 2.0)[i % 2]
        g = grids[(i // 2) % 2]
        v = variants[(i // 4) % 4]
        if v == "bellman_inf" and g.dim == 1:
            v = "pucci_minus"
        kind = bell if v == "bellman_inf" else _op(v, 1.0, 2.0)
        lo, hi = _random_pair(rng, g)
        rep = comparison_harness(FlowConfig(kind, m=m, t_end=p["t_end"]), lo, hi)
        worst = max(worst, rep.worst_violation)
        total += rep.steps
    out.info.update(steps=total)
    out.checks.append(Check("worst_violation", "comparison principle", worst, 1e-12, "<="))


def _ladder_order(hs, vals):
    return float(np.polyfit(np.log(hs), np.log(vals), 1)[0])


def _proc_barriers(p, out: Outcome):
    cc, ratios = bar.calibrate_c_cons(dim=2)
    dom, heat = bar.calibration_barrier(2)
    hs = list(bar.CALIBRATION_LADDER)
    mags = []
    for h in hs:
        g = build_grid(dom, h)
        rep = bar.residual_check(heat, g, bar.CALIBRATION_WINDOW, "exact")
        mags.append(rep.max_abs)
        out.checks.append(Check(f"heat_exact_h{h:.4g}", "heat kernel solves the heat equation",
                                rep.max_abs, rep.threshold, "<="))
    out.checks.append(Check("heat_order", "second-order consistency", _ladder_order(hs, mags), 1.9, ">="))
    pm = bar.BarrierSpec("heat_kernel", EllipticitySpec(1.0, 2.0), dim=2)
    for h in hs:
        rep = bar.residual_check(pm, build_grid(dom, h), bar.CALIBRATION_WINDOW, "sub")
        out.checks.append(Check(f"pucci_sub_h{h:.4g}", "heat-kernel subsolution",
                                rep.worst, -rep.threshold, ">="))
    bad = 0
    for lam, Lam, n, m in p["exponent_cases"]:
        a, b, k = bar.barenblatt_exponents(EllipticitySpec(lam, Lam), n, m, exact=True)
        L, La, M = Fraction(lam), Fraction(Lam), Fraction(m)
        den = 2 * L + n * (M - 1) * La
        bad += (a * den != n * (M - 1) * La) + (b * den != 2 * L) + (k * 2 * den != 1)
    out.checks.append(Check("barenblatt_identity_failures", "self-similar exponents", float(bad), 0.0, "<="))
    # separable supersolution from the M+ eigenpair
    spec = EllipticitySpec(1.0, 2.0)
    g = build_grid(Interval(math.pi), math.pi / p["cells"])
    e = solve_linear(OperatorKind("pucci_plus", spec), g, distance_field(g))
    sep = bar.BarrierSpec("separable", spec, profile=e.profile, mu=e.mu, K=1.0)
    tol = 10 * (g.h ** 2 + 1e-5) * e.mu
    for v in ("pucci_minus", "laplacian", "pucci_plus"):
        rep = bar.residual_check(sep, g, (0.0, 2.0), "super", operator=OperatorKind(v, spec), tol=tol)
        out.checks.append(Check(f"separable_super_{v}", "separable supersolution",
                                rep.worst, tol, "<="))
    out.info.update(c_cons_frozen=bar.C_CONS, c_cons_recalibrated=cc, calibration_ratios=ratios)


def _proc_uniqueness(p, out: Outcome):
    L = math.pi
    g = build_grid(Interval(L), L / p["cells"])
    op = _op("pucci_minus", 1.0, 2.0)
    a = distance_field(g)
    b = Field.from_function(g, lambda x: np.sin(x) * (1 + 0.5 * np.cos(x)) ** 2)
    lin = uniqueness_probe(op, g, "linear", a, b)
    m = p["m"]
    g2 = build_grid(Interval(1.0), 1.0 / p["cells"])
    a2 = Field(g2, distance_field(g2).values ** (1 / m))
    b2 = Field.from_function(g2, lambda x: 3 * (np.sin(np.pi * x) * (1 + 0.5 * np.cos(np.pi * x))) ** (1 / m))
    sub = uniqueness_probe(op, g2, "sublinear", a2, b2, m=m)
    out.checks.append(Check("linear_profile_diff", "unique normalised limit", lin.difference, 1e-3, "<="))
    out.checks.append(Check("sublinear_profile_diff", "unique sublinear limit", sub.difference, 1e-3, "<="))


def _proc_eventual(p, out: Outcome):
    g = build_grid(Interval(math.pi), math.pi / p["cells"])
    op = _op("laplacian")
    e = solve_linear(op, g, distance_field(g))
    u0 = Field.from_function(g, lambda x: 0.7 * np.sin(x) + 0.5 * np.sin(3 * x))
    start = midpoint_concavity(u0, LOG)
    cfg = FlowConfig(op, t_end=p["t_end"], schedule=SnapshotSchedule("uniform", p["snap_dt"]))
    tr = Flow(cfg, g).evolve(u0, slopes=False)
    from .geometry import hessian_bound
    _, c1 = hessian_bound(e.profile, LOG)
    probe = eventual_concavity_probe(tr, e, p["eps_fraction"] * c1)
    out.info.update(c1=c1, t0=probe.t0, start_worst=start.worst)
    out.checks.append(Check("start_not_log_concave", "non-log-concave start", start.worst, start.tol, ">="))
    out.checks.append(Check("t0_found", "eventual log-concavity",
                            float(probe.t0) if probe.reached else math.inf, p["t_end"], "<="))


PROCEDURES = MappingProxyType({
    "linear_1d": _proc_linear_1d,
    "scaling": _proc_scaling,
    "logconc_2d": _proc_logconc_2d,
    "sublinear_1d": _proc_sublinear_1d,
    "sqrtconc": _proc_sqrtconc,
    "ab": _proc_ab,
    "comparison": _proc_comparison,
    "barriers": _proc_barriers,
    "uniqueness": _proc_uniqueness,
    "eventual": _proc_eventual,
})


def _entry(proc, description, **params):
    return MappingProxyType({"procedure": proc, "description": description,
                             "params": MappingProxyType(params)})


REGISTRY = MappingProxyType({
    "linear-1d-laplacian": _entry(
        "linear_1d", "1D Laplacian eigenpair on (0, pi) against sin and mu = 1",
        length=math.pi, cells=256, lambda_low=1.0, lambda_high=1.0,
        runs=(("laplacian", 1.0, True),)),
    "linear-1d-pucci": _entry(
        "linear_1d", "1D Pucci eigenpairs: M- gives mu = 2 with profile sin, M+ gives mu = 1",
        length=math.pi, cells=256, lambda_low=1.0, lambda_high=2.0,
        runs=(("pucci_minus", 2.0, True), ("pucci_plus", 1.0, False))),
    "domain-scaling": _entry(
        "scaling", "halving the interval multiplies mu by 4",
        variant="pucci_minus", lambda_low=1.0, lambda_high=2.0, length=math.pi, cells=128),
    "logconc-2d-pucci": _entry(
        "logconc_2d", "log-concavity of the 2D M- eigenfield on the unit square",
        variant="pucci_minus", lambda_low=1.0, lambda_high=2.0, lx=1.0, ly=1.0, h=1 / 96, band=4),
    "sublinear-1d-m2": _entry(
        "sublinear_1d", "t u(t) converges to the solution of -(f^2)'' = f on (0, 1)",
        m=2.0, length=1.0, cells=256, fit_t_end=256.0),
    "sqrt-concavity-m2": _entry(
        "sqrtconc", "square-root concavity of the m = 2 limit profile in 1D and on the square",
        m=2.0, length=1.0, cells=256, h2=1 / 48, lambda_low=1.0, lambda_high=2.0, band=4),
    "ab-inequality-m2": _entry(
        "ab", "empirical one-sided time-derivative constant for m = 2",
        m=2.0, length=1.0, cells=128, window=(0.5, 4.0), snap_dt=0.01, tau=1.0,
        synthetic_dt=1e-3),
    "comparison-random": _entry(
        "comparison", "100 random ordered pairs stay ordered (m = 1 and 2)",
        pairs=100, seed=20240601, h1=1 / 64, h2=1 / 16, t_end=0.02),
    "barrier-residuals": _entry(
        "barriers", "discrete residuals of the closed-form barriers",
        cells=128, exponent_cases=((1.0, 1.0, 1, 2.0), (1.0, 2.0, 2, 2.0), (0.5, 3.0, 3, 1.5),
                                   (0.3, 0.7, 2, 3.25))),
    "limit-uniqueness": _entry(
        "uniqueness", "unrelated initial data give the same normalised limit",
        cells=128, m=2.0),
    "eventual-logconc": _entry(
        "eventual", "a non-log-concave bump becomes strongly log-concave",
        cells=128, t_end=3.0, snap_dt=0.02, eps_fraction=0.2),
})

# acceptance criterion number -> experiment name
ACCEPTANCE = MappingProxyType({
    1: "linear-1d-laplacian", 2: "linear-1d-pucci", 3: "domain-scaling", 4: "logconc-2d-pucci",
    5: "sublinear-1d-m2", 6: "sqrt-concavity-m2", 7: "ab-inequality-m2", 8: "comparison-random",
    9: "barrier-residuals", 10: "limit-uniqueness", 11: "eventual-logconc",
})


def run_experiment(name: str) -> Outcome:
    """Run a registered experiment and return its outcome record."""
    if name not in REGISTRY:
        raise UnknownExperimentError(
            f"unknown experiment {name!r}; registered: {', '.join(sorted(REGISTRY))}")
    entry = REGISTRY[name]
    out = Outcome(name, entry["description"])
    t0 = time.perf_counter()
    PROCEDURES[entry["procedure"]](entry["params"], out)
    out.wall_time = time.perf_counter() - t0
    return out


def write_outcomes(outcomes, directory) -> None:
    """``outcomes.json`` plus a one-row-per-check ``summary.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "outcomes.json").write_text(json.dumps([o.to_json() for o in outcomes], indent=2,
                                                default=_json_default))
    with open(d / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "check", "measured", "relation", "threshold", "passed"])
        for o in outcomes:
            for c in o.checks:
                w.writerow([o.name, c.label, repr(c.measured), c.relation, repr(c.threshold), c.passed])


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)
