import math

import numpy as np
import pytest

from pucciflow.eigen import (
    EigenConvergenceError, band_mask, hopf_slope, solve_linear, solve_sublinear, uniqueness_probe,
)
from pucciflow.grid import Field, Interval, Rectangle, build_grid, distance_field
from pucciflow.matrix_ops import EllipticitySpec, InputDomainError, OperatorKind
from pucciflow.verify import shooting_sublinear_1d

LAP = OperatorKind("laplacian")
PM = OperatorKind("pucci_minus", EllipticitySpec(1.0, 2.0))


def discrete_sin_eig(h):
    return 4 / h ** 2 * math.sin(h / 2) ** 2


def test_linear_matches_discrete_eigenvalue():
    h = math.pi / 32
    g = build_grid(Interval(math.pi), h)
    r = solve_linear(LAP, g, distance_field(g), tol_mu=1e-8, tol_profile=1e-8)
    assert r.mu == pytest.approx(discrete_sin_eig(h), rel=1e-7)
    assert np.allclose(r.profile.values, np.sin(g.points[:, 0]) / np.sin(g.points[:, 0]).max(),
                       atol=1e-6)
    assert r.residual_ok


def test_pucci_1d_is_scaled_laplacian():
    h = math.pi / 32
    g = build_grid(Interval(math.pi), h)
    r = solve_linear(PM, g, distance_field(g), tol_mu=1e-8, tol_profile=1e-8)
    assert r.mu == pytest.approx(2 * discrete_sin_eig(h), rel=1e-7)


def test_square_laplacian():
    h = math.pi / 16
    g = build_grid(Rectangle(math.pi, math.pi), h)
    r = solve_linear(LAP, g, distance_field(g), tol_mu=1e-7)
    assert r.mu == pytest.approx(2 * discrete_sin_eig(h), rel=1e-5)


def test_stationary_after_convergence():
    g = build_grid(Interval(math.pi), math.pi / 16)
    r = solve_linear(LAP, g, distance_field(g), tol_mu=1e-10, tol_profile=1e-10)
    again = solve_linear(LAP, g, r.profile, tol_mu=1e-10, tol_profile=1e-10)
    assert np.max(np.abs(again.profile.values - r.profile.values)) < 1e-9
    assert again.mu == pytest.approx(r.mu, rel=1e-10)


def test_gamma_star_for_tent():
    # projection of the tent onto the normalised sine mode is 4/pi
    g = build_grid(Interval(math.pi), math.pi / 128)
    r = solve_linear(LAP, g, distance_field(g))
    assert r.gamma_star == pytest.approx(4 / math.pi, rel=2e-3)


def test_sublinear_matches_shooting():
    g = build_grid(Interval(1.0), 1 / 32)
    r = solve_sublinear(LAP, g, 2.0, Field(g, np.sqrt(g.distance())), tol_profile=1e-6)
    f = shooting_sublinear_1d(2.0, 1.0, 1.0)
    x = g.points[:, 0]
    assert np.max(np.abs(r.profile.values - f(x))) <= 2e-3 * np.max(f(x))
    assert r.mu == 1.0


def test_uniqueness_probe():
    g = build_grid(Interval(math.pi), math.pi / 32)
    a = distance_field(g)
    b = Field.from_function(g, lambda x: x * (math.pi - x) ** 2)
    rep = uniqueness_probe(PM, g, "linear", a, b, tol_mu=1e-8, tol_profile=1e-8)
    assert rep.ok and rep.difference < 1e-5
    with pytest.raises(InputDomainError):
        uniqueness_probe(PM, g, "other", a, b)


def test_bad_inputs():
    g = build_grid(Interval(1.0), 1 / 16)
    with pytest.raises(InputDomainError):
        solve_linear(LAP, g, Field(g, np.zeros(g.n_nodes)))
    with pytest.raises(InputDomainError):
        solve_sublinear(LAP, g, 1.0, distance_field(g))
    with pytest.raises(EigenConvergenceError):
        solve_linear(LAP, g, distance_field(g), tol_mu=1e-15, tol_profile=1e-15, max_time=0.01)


def test_hopf_and_band():
    g = build_grid(Interval(math.pi), math.pi / 64)
    r = solve_linear(LAP, g, distance_field(g))
    s = hopf_slope(r.profile)
    assert s.min > 0 and s.min == pytest.approx(1.0, rel=2e-3)
    b = band_mask(g, 4)
    assert b.sum() == g.n_interior - 2 * 3
    assert not b[g.n_interior:].any()
