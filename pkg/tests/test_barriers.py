import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from pucciflow.barriers import (
    C_CONS, BarrierSpec, DomainViolationError, _eval, barenblatt_exponents, calibrate_c_cons,
    heat_exponents, residual_check, sample, sandwich_run,
)
from pucciflow.eigen import solve_linear, solve_sublinear
from pucciflow.flow import FlowConfig, SnapshotSchedule
from pucciflow.grid import Disk, Field, Interval, Rectangle, build_grid, distance_field
from pucciflow.matrix_ops import EllipticitySpec, InputDomainError, OperatorKind

SPEC = EllipticitySpec(1.0, 2.0)
x, y, t = sp.symbols("x y t", real=True)


def pucci_minus_sym(H, spec):
    ev = np.linalg.eigvalsh(H)
    return spec.lambda_low * ev[ev > 0].sum() + spec.lambda_high * ev[ev < 0].sum()


def continuous_residual(expr_state, expr_u, pts, tval, spec):
    """M^-(D^2 state) - u_t at points, from symbolic derivatives."""
    H = sp.hessian(expr_state, (x, y))
    Hf = sp.lambdify((x, y, t), H, "numpy")
    ut = sp.lambdify((x, y, t), sp.diff(expr_u, t), "numpy")
    out = []
    for px, py in pts:
        Hm = np.array(Hf(px, py, tval), dtype=float)
        out.append(pucci_minus_sym(Hm, spec) - float(ut(px, py, tval)))
    return np.array(out)


def test_heat_kernel_is_continuous_subsolution(rng):
    a, b = heat_exponents(SPEC, 2)
    g = t ** (-b) * sp.exp(-a * (x ** 2 + y ** 2) / t)
    pts = rng.uniform(-3, 3, size=(200, 2))
    for tv in (0.1, 0.5, 2.0):
        res = continuous_residual(g, g, pts, tv, SPEC)
        scale = abs(b) * tv ** (-b - 1)
        assert np.all(res >= -1e-10 * scale)


def test_heat_kernel_time_derivative_matches_sympy():
    a, b = heat_exponents(SPEC, 2)
    g = 1.5 * (t + 0.2) ** (-b) * sp.exp(-a * (x ** 2 + y ** 2) / (t + 0.2))
    gt = sp.lambdify((x, y, t), sp.diff(g, t), "numpy")
    grid = build_grid(Rectangle(2, 2), 0.25)
    bs = BarrierSpec("heat_kernel", SPEC, dim=2, center=(0.0, 0.0), c0=1.5, tau=0.2)
    u, ut, _ = _eval(bs, grid, 0.3)
    P = grid.points
    assert np.allclose(ut, gt(P[:, 0], P[:, 1], 0.3), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("m", [1.5, 2.0, 3.0])
def test_barenblatt_is_continuous_subsolution(m, rng):
    a, b, k = barenblatt_exponents(SPEC, 2, m)
    r2 = x ** 2 + y ** 2
    V = t ** (-a) * (1 - k * r2 / t ** b)
    U = ((m - 1) / m * V) ** (1 / (m - 1))
    pts = rng.uniform(-1, 1, size=(200, 2))
    tv = 1.0
    inside = [p for p in pts if 1 - k * (p ** 2).sum() / tv ** b > 0.05]
    res = continuous_residual(U ** m, U, inside, tv, SPEC)
    assert np.all(res >= -1e-9)


def test_barenblatt_exponents_reduce_to_classical():
    for n in (1, 2):
        for m in (Fraction(3, 2), Fraction(2), Fraction(3)):
            a, b, k = barenblatt_exponents(EllipticitySpec(1.0, 1.0), n, m, exact=True)
            assert a / (m - 1) == Fraction(n) / (n * (m - 1) + 2)
            assert b / 2 == Fraction(1) / (n * (m - 1) + 2)
            assert isinstance(k, Fraction)


def test_residual_check_discrete_heat_kernel():
    grid = build_grid(Rectangle(4, 4), 1 / 16)
    bs = BarrierSpec("heat_kernel", SPEC, dim=2, center=(2.0, 2.0), tau=0.1)
    rep = residual_check(bs, grid, (0.25, 1.0), "sub")
    assert rep.ok and rep.nodes_checked > 0
    assert rep.threshold == pytest.approx(C_CONS / 256)


def test_calibration_reproduces_constant():
    C, ratios = calibrate_c_cons()
    assert len(ratios) == 3
    assert C <= C_CONS and C == pytest.approx(C_CONS, rel=0.02)


def test_truncated_support_and_violation():
    bs = BarrierSpec("truncated_heat", SPEC, dim=2, center=(0.0, 0.0), c0=1.0, delta0=0.2, tau=0.01)
    grid = build_grid(Disk(1.0), 1 / 16)
    R = bs.support_radius(0.0)
    f = sample(bs, grid, 0.0)
    r = np.linalg.norm(grid.points, axis=1)
    assert np.all(f.values[r > R + 1e-12] == 0)
    assert np.all(f.values[r < R - 1e-9] > 0)
    tg = bs.growth_limit()
    eps = 1e-4
    assert bs.support_radius(tg) >= max(bs.support_radius(tg - eps), bs.support_radius(tg + eps))
    small = build_grid(Disk(0.2), 1 / 40)
    with pytest.raises(DomainViolationError) as exc:
        sample(bs, small, 0.0)
    assert exc.value.radius == pytest.approx(R)


def test_barenblatt_pressure_and_validation():
    bs = BarrierSpec("barenblatt", SPEC, m=2.0, dim=1, center=(1.0,), c=0.05, tau=1.0)
    grid = build_grid(Interval(2.0), 1 / 32)
    f = sample(bs, grid, 0.0)
    assert np.allclose(f.meta["pressure"], 2 * f.values)
    with pytest.raises(InputDomainError):
        BarrierSpec("barenblatt", SPEC, m=1.0)
    with pytest.raises(InputDomainError):
        BarrierSpec("truncated_heat", SPEC, c0=0.1, delta0=0.2)
    with pytest.raises(InputDomainError):
        BarrierSpec("nope")


def test_separable_is_exact_on_eigenpair():
    g = build_grid(Interval(math.pi), math.pi / 32)
    op = OperatorKind("pucci_minus", SPEC)
    r = solve_linear(op, g, distance_field(g), tol_mu=1e-9, tol_profile=1e-9)
    bs = BarrierSpec("separable", SPEC, dim=1, profile=r.profile, mu=r.mu, K=2.0)
    rep = residual_check(bs, g, (0.0, 1.0), "exact", operator=op, tol=1e-6)
    assert rep.ok
    g2 = build_grid(Interval(1.0), 1 / 32)
    lap = OperatorKind("laplacian")
    rs = solve_sublinear(lap, g2, 2.0, Field(g2, np.sqrt(g2.distance())), tol_profile=1e-8)
    bs2 = BarrierSpec("separable", m=2.0, dim=1, profile=rs.profile, K=1.0)
    rep2 = residual_check(bs2, g2, (0.0, 2.0), "exact", operator=lap, tol=1e-3)
    assert rep2.ok


def test_sandwich_run():
    g = build_grid(Interval(math.pi), math.pi / 32)
    op = OperatorKind("laplacian")
    r = solve_linear(op, g, distance_field(g))
    low = BarrierSpec("separable", dim=1, profile=r.profile, mu=r.mu, K=0.5)
    high = BarrierSpec("separable", dim=1, profile=r.profile, mu=r.mu, K=2.0)
    cfg = FlowConfig(op, t_end=1.0, schedule=SnapshotSchedule("uniform", 0.25))
    rep = sandwich_run(low, high, cfg, r.profile)
    assert rep.ok
    with pytest.raises(InputDomainError):
        sandwich_run(high, high, cfg, Field(g, 0.1 * r.profile.values))
