import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pucciflow.matrix_ops import (
    ConfigurationError, EllipticitySpec, InputDomainError, OperatorKind, SymMatrix,
    ellipticity_sandwich_check, operator_eval, pucci_minus, pucci_plus, sym_eigvals,
)

SPEC12 = EllipticitySpec(1.0, 2.0)
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def sym2(a, b, c):
    return SymMatrix.from_upper([a, b, c])


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def brute_force(M, spec, sense, n_angles=3600):
    """Extremise tr(A M) over A = R diag(a1, a2) R^T, a_i in {lambda, Lambda}."""
    best = math.inf if sense == "min" else -math.inf
    pick = min if sense == "min" else max
    for k in range(n_angles):
        R = rot(math.pi * k / n_angles)
        for a1 in (spec.lambda_low, spec.lambda_high):
            for a2 in (spec.lambda_low, spec.lambda_high):
                A = R @ np.diag([a1, a2]) @ R.T
                best = pick(best, float(np.sum(A * M)))
    return best


def test_pucci_plus_examples():
    assert pucci_plus(sym2(1, 0, -1), SPEC12) == 1.0
    assert pucci_plus(sym2(0, 0, 0), SPEC12) == 0.0
    assert pucci_plus(SymMatrix.from_upper([0.0] * 6), SPEC12) == 0.0
    assert pucci_plus(sym2(0, 1, 0), SPEC12) == pytest.approx(1.0, abs=1e-15)


def test_pucci_minus_examples():
    assert pucci_minus(sym2(1, 0, -1), SPEC12) == -1.0
    assert pucci_minus(sym2(1, 0, 1), SPEC12) == 2.0


def test_pucci_minus_matches_brute_force_on_sweep_angles(rng):
    # eigenvectors on the sweep grid: the brute force is exact
    for _ in range(10):
        k = int(rng.integers(3600))
        R = rot(math.pi * k / 3600)
        M = R @ np.diag(rng.normal(size=2)) @ R.T
        M = 0.5 * (M + M.T)
        S = SymMatrix.from_array(M)
        assert abs(pucci_minus(S, SPEC12) - brute_force(M, SPEC12, "min")) <= 1e-12 * (1 + abs(M).max())
        assert abs(pucci_plus(S, SPEC12) - brute_force(M, SPEC12, "max")) <= 1e-12 * (1 + abs(M).max())


def test_pucci_minus_random_against_brute_force(rng):
    for _ in range(10):
        a, b, c = rng.normal(size=3)
        M = np.array([[a, b], [b, c]])
        exact = pucci_minus(sym2(a, b, c), SPEC12)
        brute = brute_force(M, SPEC12, "min")
        # the infimum can never exceed a sampled value; the sweep misses it by O(dtheta^2)
        assert exact <= brute + 1e-12
        assert brute - exact <= 1e-5 * (1 + abs(M).max())


def test_sym_eigvals_against_numpy(rng):
    for n in (1, 2, 3):
        for _ in range(200):
            A = rng.normal(size=(n, n))
            A = A + A.T
            got = np.array(sym_eigvals(SymMatrix.from_array(A)))
            assert np.allclose(got, np.linalg.eigvalsh(A), atol=1e-10)


def test_sym_eigvals_repeated_3x3():
    assert sym_eigvals(SymMatrix.from_upper([2, 0, 0, 2, 0, 2])) == (2, 2, 2)
    ev = sym_eigvals(SymMatrix.from_upper([1, 1, 1, 1, 1, 1]))
    assert np.allclose(ev, [0, 0, 3], atol=1e-12)


def test_operator_eval_examples():
    lap = OperatorKind("laplacian")
    assert operator_eval(lap, sym2(2, 0, 3)) == 5.0
    flat = OperatorKind("pucci_minus", EllipticitySpec(1, 1))
    M = sym2(0.3, -1.2, 4.0)
    assert operator_eval(flat, M) == pytest.approx(M.trace(), abs=1e-14)
    bell = OperatorKind("bellman_inf", EllipticitySpec(1, 2), (sym2(1, 0, 1), sym2(1, 0, 2)))
    assert operator_eval(bell, sym2(-1, 0, 1)) == 0.0


def test_bellman_validation():
    with pytest.raises(ConfigurationError):
        OperatorKind("bellman_inf", EllipticitySpec(1, 2), ())
    with pytest.raises(ConfigurationError, match="spectrum"):
        OperatorKind("bellman_inf", EllipticitySpec(1, 2), (sym2(3, 0, 1),))
    with pytest.raises(ConfigurationError):
        OperatorKind("pucci_minus", EllipticitySpec(1, 2), (sym2(1, 0, 1),))
    with pytest.raises(ConfigurationError):
        OperatorKind("hessian_det")


def test_spec_validation():
    with pytest.raises(ConfigurationError, match="2.0"):
        EllipticitySpec(2.0, 1.0)
    with pytest.raises(ConfigurationError):
        EllipticitySpec(0.0, 1.0)


def test_from_array_requires_exact_symmetry():
    with pytest.raises(InputDomainError):
        SymMatrix.from_array([[1.0, 2.0], [2.0 + 1e-15, 1.0]])


def test_sandwich_examples(rng):
    pm = OperatorKind("pucci_minus", SPEC12)
    for _ in range(50):
        M, N = (SymMatrix.from_array(x + x.T) for x in rng.normal(size=(2, 2, 2)))
        assert ellipticity_sandwich_check(pm, M, N)
    lap = OperatorKind("laplacian", EllipticitySpec(0.5, 2.0))
    assert ellipticity_sandwich_check(lap, sym2(1, 0, 0), sym2(0, 0, 0))


def test_bellman_sandwich_random_pairs(rng):
    mats = (sym2(1, 0, 1), sym2(1.5, 0.3, 1.4), sym2(2, 0, 1))
    bell = OperatorKind("bellman_inf", SPEC12, mats)
    for _ in range(1000):
        M, N = (SymMatrix.from_array(x + x.T) for x in rng.normal(size=(2, 2, 2)))
        assert ellipticity_sandwich_check(bell, M, N)


sym2_strategy = st.tuples(finite, finite, finite).map(lambda t: sym2(*t))
kinds = [OperatorKind("pucci_minus", SPEC12), OperatorKind("pucci_plus", SPEC12),
         OperatorKind("laplacian"),
         OperatorKind("bellman_inf", SPEC12, (sym2(1, 0, 1), sym2(1.5, 0.3, 1.4)))]


@settings(max_examples=200, deadline=None)
@given(sym2_strategy, st.sampled_from([0.0, 0.5, 1.0, 2.0, 10.0]))
def test_homogeneity(M, t):
    for k in kinds:
        assert abs(operator_eval(k, M.scale(t)) - t * operator_eval(k, M)) <= 1e-12 * (1 + abs(operator_eval(k, M))) * max(1, t)


@settings(max_examples=200, deadline=None)
@given(sym2_strategy, sym2_strategy)
def test_concavity(M, N):
    for k in kinds:
        if not k.concave:
            continue
        mid = (M + N).scale(0.5)
        val = operator_eval(k, M) + operator_eval(k, N) - 2 * operator_eval(k, mid)
        assert val <= 1e-12 * (1 + abs(operator_eval(k, M)) + abs(operator_eval(k, N)))


@settings(max_examples=200, deadline=None)
@given(sym2_strategy)
def test_duality(M):
    assert pucci_plus(M, SPEC12) == -pucci_minus(-M, SPEC12)


@settings(max_examples=200, deadline=None)
@given(sym2_strategy, st.floats(0, 5), st.floats(0, 5), st.floats(0, 2 * math.pi))
def test_monotone_in_psd_direction(M, p1, p2, th):
    R = rot(th)
    P = R @ np.diag([p1, p2]) @ R.T
    N = SymMatrix.from_array(0.5 * (P + P.T))
    for k in kinds:
        assert operator_eval(k, M + N) >= operator_eval(k, M) - 1e-12 * (1 + abs(operator_eval(k, M)))


@settings(max_examples=100, deadline=None)
@given(sym2_strategy, st.floats(0, 2 * math.pi))
def test_rotation_invariance(M, th):
    R = rot(th)
    A = R.T @ M.to_array() @ R
    S = SymMatrix.from_array(0.5 * (A + A.T))
    for f in (pucci_minus, pucci_plus):
        assert abs(f(S, SPEC12) - f(M, SPEC12)) <= 1e-10 * (1 + abs(M.to_array()).max())
