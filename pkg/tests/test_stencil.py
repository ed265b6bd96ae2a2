import math

import numpy as np
import pytest

from pucciflow.grid import Disk, Field, Interval, Polygon, Rectangle, build_grid
from pucciflow.matrix_ops import EllipticitySpec, OperatorKind, SymMatrix, pucci_minus
from pucciflow.stencil import (
    DiscreteOperator, StencilError, StencilSet, apply_operator, directional_second_difference,
    frame_values, monotonicity_audit,
)

SPEC12 = EllipticitySpec(1.0, 2.0)


def op(variant, grid, spec=SPEC12, K=8, mats=()):
    return DiscreteOperator(OperatorKind(variant, spec, mats), grid, StencilSet.build(grid.dim, K))


def test_frames_are_orthogonal_lattice_pairs():
    s = StencilSet.build(2, 8)
    assert s.K == 8 and s.radius == 3
    for a, b in s.frames:
        assert a[0] * b[0] + a[1] * b[1] == 0
        assert a[0] ** 2 + a[1] ** 2 == b[0] ** 2 + b[1] ** 2
    assert [f for f in StencilSet.build(2, 4).frames] == [s.frames[i] for i in (0, 2, 4, 6)]
    with pytest.raises(Exception):
        StencilSet.build(2, 3)


def test_directional_second_difference_examples():
    g = build_grid(Interval(math.pi), math.pi / 16)
    u = Field.from_function(g, lambda x: x ** 2, boundary_value=None)
    for k in range(g.n_interior):
        assert directional_second_difference(u, k, (1,)) == pytest.approx(2.0, rel=1e-12)
    c = Field.from_function(g, lambda x: 3.0 + 0 * x, boundary_value=None)
    assert directional_second_difference(c, 4, (1,)) == 0.0
    g2 = build_grid(Rectangle(1, 1), 1 / 8)
    xy = Field.from_function(g2, lambda x, y: x * y, boundary_value=None)
    k = g2.lattice_node((4, 4))
    assert directional_second_difference(xy, k, (1, 1)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(StencilError):
        directional_second_difference(xy, g2.lattice_node((1, 1)), (3, 1))


def test_cut_cell_axis_exact_on_quadratic():
    g = build_grid(Disk(1.0), 0.15)
    u = Field.from_function(g, lambda x, y: 3 * x ** 2 - y ** 2, boundary_value=None)
    vals = [directional_second_difference(u, k, (1, 0)) for k in range(g.n_interior)]
    assert np.allclose(vals, 6.0, rtol=1e-9)


def test_flat_pucci_is_laplacian():
    g = build_grid(Rectangle(1, 1), 1 / 16)
    u = Field.from_function(g, lambda x, y: x ** 2 + y ** 2, boundary_value=None)
    out = apply_operator(op("pucci_minus", g, EllipticitySpec(1, 1)), u)
    assert np.allclose(out.interior, 4.0, rtol=1e-10)


def test_saddle_value_and_axis_selection():
    g = build_grid(Rectangle(1, 1), 1 / 16)
    u = Field.from_function(g, lambda x, y: x ** 2 - y ** 2, boundary_value=None)
    D = op("pucci_minus", g)
    vals, sel = D.apply_values(u.values, return_selection=True)
    assert np.allclose(vals, -2.0, rtol=1e-10)
    # the axis frame attains the exact value; ties go to the lowest index
    assert np.all(sel == 0)


def test_1d_pucci_on_sin():
    g = build_grid(Interval(math.pi), math.pi / 64)
    u = Field.from_function(g, np.sin)
    out = op("pucci_minus", g).apply_values(u.values)
    x = g.points[: g.n_interior, 0]
    assert np.allclose(out, -2 * np.sin(x), atol=2 * (g.h ** 2) / 12 + 1e-12)


@pytest.mark.parametrize("variant", ["pucci_minus", "pucci_plus", "laplacian", "bellman_inf"])
def test_monotonicity_audit(variant):
    g = build_grid(Polygon([(0, 0), (2, 0), (0.5, 1.5)]), 0.1)
    mats = (SymMatrix.from_upper([1, 0, 1]), SymMatrix.from_upper([1.5, 0.3, 1.4]),
            SymMatrix.from_upper([1.6, 0.35, 1.5])) if variant == "bellman_inf" else ()
    rep = monotonicity_audit(op(variant, g, mats=mats), trials=500, seed=0)
    assert rep.ok, rep.violations[:3]


def test_frame_values_sandwich(rng):
    # the sandwich is a property of the frame-based schemes; cross-difference Bellman
    # terms are consistent and monotone but not bounded by the lattice frames
    g = build_grid(Disk(1.0), 0.1)
    spec = EllipticitySpec(0.4, 3.5)
    mats = (SymMatrix.from_upper([1, 0, 1]), SymMatrix.from_upper([1.0, 1.1, 2.8]),
            SymMatrix.from_upper([2.8, -1.1, 1.0]))
    for kind in ("laplacian", "pucci_minus", "pucci_plus", "bellman_inf"):
        D = op(kind, g, spec=spec, mats=mats if kind == "bellman_inf" else ())
        if kind == "bellman_inf":
            assert D.bell_scheme == ["axis", "frame-projection", "frame-projection"]
        for _ in range(5):
            u = Field(g, rng.normal(size=g.n_nodes))
            val = D.apply_values(u.values)
            lo = frame_values(D, u, "pucci_minus")
            hi = frame_values(D, u, "pucci_plus")
            scale = 1e-12 * (1 + np.abs(val))
            assert np.all(lo - scale <= val) and np.all(val <= hi + scale)


def test_bellman_schemes_reported():
    g = build_grid(Rectangle(1, 1), 1 / 8)
    mats = (SymMatrix.from_upper([1, 0, 1]), SymMatrix.from_upper([1.5, 0.3, 1.4]),
            SymMatrix.from_upper([1.6, 0.35, 1.5]))
    D = op("bellman_inf", g, mats=mats)
    assert len(D.bell_scheme) == 3
    assert set(D.bell_scheme) <= {"axis", "cross-difference", "frame-projection"}


def test_consistency_order_exp():
    errs = []
    for h, K in ((1 / 16, 2), (1 / 32, 4), (1 / 64, 8)):
        g = build_grid(Rectangle(1, 1), h)
        u = Field.from_function(g, lambda x, y: np.exp(x + y), boundary_value=None)
        D = op("pucci_minus", g, K=K)
        vals = D.apply_values(u.values)
        pts = g.points[: g.n_interior]
        exact = np.array([pucci_minus(SymMatrix.from_upper([e, e, e]), SPEC12)
                          for e in np.exp(pts[:, 0] + pts[:, 1])])
        # nodes where the 45-degree frame reaches the lattice
        inner = g.distance()[: g.n_interior] >= 1.5 * h
        errs.append(np.max(np.abs(vals - exact)[inner]))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_frame_count_monotone_and_homogeneous(rng):
    g = build_grid(Rectangle(1, 1), 1 / 16)
    u = rng.normal(size=g.n_nodes)
    prev = None
    for K in (1, 2, 4, 8):
        v = op("pucci_minus", g, K=K).apply_values(u)
        if prev is not None:
            assert np.all(v <= prev + 1e-12 * (1 + np.abs(prev)))
        prev = v
    D = op("pucci_plus", g)
    base = D.apply_values(u)
    for t in (0.0, 0.5, 3.0):
        assert np.allclose(D.apply_values(t * u), t * base, rtol=1e-12, atol=1e-12)
