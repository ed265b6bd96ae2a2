"""Pointwise Pucci extremal operators and Bellman-form operators on symmetric matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "InputDomainError",
    "EllipticitySpec",
    "SymMatrix",
    "OperatorKind",
    "sym_eigvals",
    "pucci_plus",
    "pucci_minus",
    "operator_eval",
    "ellipticity_sandwich_check",
]


class InputDomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class ConfigurationError(ValueError):
    """Raised when a configuration object violates its invariants."""


@dataclass(frozen=True)
class EllipticitySpec:
    """Ellipticity constants ``0 < lambda_low <= lambda_high`` of the Pucci class."""

    lambda_low: float = 1.0
    lambda_high: float = 1.0

    def __post_init__(self):
        lo, hi = float(self.lambda_low), float(self.lambda_high)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigurationError(f"ellipticity constants must be finite, got ({lo}, {hi})")
        if lo <= 0:
            raise ConfigurationError(f"lambda_low must be positive, got {lo}")
        if hi < lo:
            raise ConfigurationError(
                f"lambda_high ({hi}) must be >= lambda_low ({lo})")
        object.__setattr__(self, "lambda_low", lo)
        object.__setattr__(self, "lambda_high", hi)


class SymMatrix:
    """Symmetric n x n matrix (n = 1, 2, 3) stored as its upper triangle.

    Construct with :meth:`from_array` (symmetry checked to exact equality) or
    :meth:`from_upper` (row-major upper triangle).
    """

    __slots__ = ("n", "upper")

    def __init__(self, n: int, upper: Sequence[float]):
        if n not in (1, 2, 3):
            raise InputDomainError(f"dimension must be 1, 2 or 3, got {n}")
        upper = tuple(float(v) for v in upper)
        if len(upper) != n * (n + 1) // 2:
            raise InputDomainError(f"expected {n * (n + 1) // 2} upper entries, got {len(upper)}")
        if not all(math.isfinite(v) for v in upper):
            raise InputDomainError(f"non-finite matrix entry in {upper}")
        self.n = n
        self.upper = upper

    @classmethod
    def from_upper(cls, upper: Sequence[float]) -> "SymMatrix":
        k = len(upper)
        n = {1: 1, 3: 2, 6: 3}.get(k)
        if n is None:
            raise InputDomainError(f"upper triangle of length {k} does not match n = 1, 2, 3")
        return cls(n, upper)

    @classmethod
    def from_array(cls, a) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InputDomainError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InputDomainError("non-finite matrix entry")
        if not np.array_equal(a, a.T):
            raise InputDomainError("matrix is not exactly symmetric")
        n = a.shape[0]
        return cls(n, [a[i, j] for i in range(n) for j in range(i, n)])

    def to_array(self) -> np.ndarray:
        a = np.empty((self.n, self.n))
        k = 0
        for i in range(self.n):
            for j in range(i, self.n):
                a[i, j] = a[j, i] = self.upper[k]
                k += 1
        return a

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(self.n, [-v for v in self.upper])

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        _same_dim(self, other)
        return SymMatrix(self.n, [a + b for a, b in zip(self.upper, other.upper)])

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        _same_dim(self, other)
        return SymMatrix(self.n, [a - b for a, b in zip(self.upper, other.upper)])

    def scale(self, t: float) -> "SymMatrix":
        return SymMatrix(self.n, [t * v for v in self.upper])

    def trace(self) -> float:
        return sum(self.upper[k] for k in _diag_positions(self.n))

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and self.n == other.n and self.upper == other.upper

    def __hash__(self):
        return hash((self.n, self.upper))

    def __repr__(self):
        return f"SymMatrix(n={self.n}, upper={self.upper})"


def _diag_positions(n):
    return {1: (0,), 2: (0, 2), 3: (0, 3, 5)}[n]


def _same_dim(a: SymMatrix, b: SymMatrix):
    if a.n != b.n:
        raise InputDomainError(f"dimension mismatch: {a.n} vs {b.n}")


def _as_sym(M) -> SymMatrix:
    if isinstance(M, SymMatrix):
        return M
    return SymMatrix.from_array(M)


def sym_eigvals(M) -> tuple[float, ...]:
    """Eigenvalues of a symmetric matrix in ascending order, by closed form.

    2x2 uses the discriminant formula, 3x3 the trigonometric solution of the
    characteristic cubic.
    """
    M = _as_sym(M)
    if M.n == 1:
        return (M.upper[0],)
    if M.n == 2:
        a, b, c = M.upper
        mean = 0.5 * (a + c)
        rad = math.hypot(0.5 * (a - c), b)
        return (mean - rad, mean + rad)
    a11, a12, a13, a22, a23, a33 = M.upper
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    q = (a11 + a22 + a33) / 3.0
    if p1 == 0.0:
        return tuple(sorted((a11, a22, a33)))
    d1, d2, d3 = a11 - q, a22 - q, a33 - q
    p2 = d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    # det((A - qI)/p) / 2
    det = (d1 * (d2 * d3 - a23 * a23)
           - a12 * (a12 * d3 - a23 * a13)
           + a13 * (a12 * a23 - d2 * a13))
    r = det / (2.0 * p ** 3)
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    e_max = q + 2.0 * p * math.cos(phi)
    e_min = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e_mid = 3.0 * q - e_max - e_min
    return tuple(sorted((e_min, e_mid, e_max)))


def _split(M):
    eig = sym_eigvals(M)
    pos = sum(e for e in eig if e > 0)
    neg = sum(e for e in eig if e < 0)
    return pos, neg


def pucci_plus(M, spec: EllipticitySpec) -> float:
    """Maximal Pucci operator: ``Lambda * sum(e > 0) + lambda * sum(e < 0)``."""
    pos, neg = _split(M)
    return spec.lambda_high * pos + spec.lambda_low * neg


def pucci_minus(M, spec: EllipticitySpec) -> float:
    """Minimal Pucci operator: ``lambda * sum(e > 0) + Lambda * sum(e < 0)``."""
    pos, neg = _split(M)
    return spec.lambda_low * pos + spec.lambda_high * neg


@dataclass(frozen=True)
class OperatorKind:
    """Which elliptic operator F is in play.

    ``variant`` is one of ``"pucci_minus"``, ``"pucci_plus"``, ``"laplacian"``,
    ``"bellman_inf"``. Bellman matrices are validated here, once.
    """

    variant: str
    spec: EllipticitySpec = field(default_factory=EllipticitySpec)
    matrices: tuple = ()

    VARIANTS = ("pucci_minus", "pucci_plus", "laplacian", "bellman_inf")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ConfigurationError(
                f"unknown operator variant {self.variant!r}; expected one of {self.VARIANTS}")
        if self.variant == "bellman_inf":
            if len(self.matrices) == 0:
                raise ConfigurationError("bellman_inf requires a non-empty matrix list")
            mats = []
            for k, A in enumerate(self.matrices):
                S = _as_sym(A)
                eig = sym_eigvals(S)
                tol = 1e-12 * max(1.0, self.spec.lambda_high)
                if eig[0] < self.spec.lambda_low - tol or eig[-1] > self.spec.lambda_high + tol:
                    raise ConfigurationError(
                        f"bellman matrix #{k} has spectrum {eig} outside "
                        f"[{self.spec.lambda_low}, {self.spec.lambda_high}]")
                mats.append(S)
            dims = {S.n for S in mats}
            if len(dims) != 1:
                raise ConfigurationError(f"bellman matrices have mixed dimensions {sorted(dims)}")
            object.__setattr__(self, "matrices", tuple(mats))
        elif self.matrices:
            raise ConfigurationError(f"{self.variant} takes no matrix list")

    @property
    def concave(self) -> bool:
        return self.variant != "pucci_plus"

    @property
    def homogeneous(self) -> bool:
        return True

    @property
    def max_coefficient(self) -> float:
        """Upper bound on the diffusion coefficient any frame can receive."""
        if self.variant == "laplacian":
            return max(1.0, self.spec.lambda_high)
        return self.spec.lambda_high


def operator_eval(kind: OperatorKind, M) -> float:
    M = _as_sym(M)
    v = kind.variant
    if v == "pucci_minus":
        return pucci_minus(M, kind.spec)
    if v == "pucci_plus":
        return pucci_plus(M, kind.spec)
    if v == "laplacian":
        return M.trace()
    A0 = kind.matrices[0]
    if A0.n != M.n:
        raise InputDomainError(f"dimension mismatch: operator {A0.n} vs matrix {M.n}")
    Ma = M.to_array()
    return min(float(np.sum(A.to_array() * Ma)) for A in kind.matrices)


def ellipticity_sandwich_check(kind: OperatorKind, M, N, tol: float = 1e-12) -> bool:
    """Check ``M^-(M - N) <= F(M) - F(N) <= M^+(M - N)``."""
    M, N = _as_sym(M), _as_sym(N)
    _same_dim(M, N)
    diff = operator_eval(kind, M) - operator_eval(kind, N)
    D = M - N
    scale = tol * (1.0 + abs(diff))
    return (pucci_minus(D, kind.spec) - scale <= diff <= pucci_plus(D, kind.spec) + scale)
