"""Univariate polynomial arithmetic and interval nonnegativity certificates.

Polynomials are real, univariate in the timer variable and stored as ascending
coefficient tuples.  Nonnegativity of p on a compact interval [a, b] is
certified by expressing p as a nonnegative combination of the products
(t - a)^i (b - t)^j with i + j <= D, which is checkable by a single linear
program; a uniform-grid falsifier acts as the independent referee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidInterval, NoCertificate

__all__ = [
    "Poly",
    "HandelmanCertificate",
    "Witness",
    "handelman_basis",
    "certify_nonneg",
    "falsify_nonneg",
]


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    cs = [float(c) for c in coeffs]
    while len(cs) > 1 and cs[-1] == 0.0:
        cs.pop()
    if not cs:
        cs = [0.0]
    return tuple(cs)


@dataclass(frozen=True)
class Poly:
    """Immutable polynomial, coeffs[k] multiplies t**k."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @staticmethod
    def const(c: float) -> "Poly":
        return Poly((float(c),))

    @staticmethod
    def identity() -> "Poly":
        """The polynomial t."""
        return Poly((0.0, 1.0))

    @property
    def degree(self) -> int:
        """Degree; 0 for constants including the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def eval(self, t):
        """Horner evaluation; accepts scalars or numpy arrays."""
        if isinstance(t, np.ndarray):
            acc = np.zeros_like(t, dtype=float)
            for c in reversed(self.coeffs):
                acc = acc * t + c
            return acc
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    __call__ = eval

    def deriv(self) -> "Poly":
        if self.degree == 0:
            return Poly.const(0.0)
        return Poly(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def scale(self, s: float) -> "Poly":
        return Poly(tuple(s * c for c in self.coeffs))

    def shift_scale_arg(self, a: float, h: float) -> "Poly":
        """Return q with q(s) = p(a + h*s)."""
        q = [0.0] * (self.degree + 1)
        for k in range(self.degree + 1):
            acc = 0.0
            for j in range(k, self.degree + 1):
                acc += self.coeffs[j] * math.comb(j, k) * a ** (j - k)
            q[k] = acc * h**k
        return Poly(tuple(q))

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        n = max(len(self.coeffs), len(other.coeffs))
        cs = [0.0] * n
        for k, c in enumerate(self.coeffs):
            cs[k] += c
        for k, c in enumerate(other.coeffs):
            cs[k] += c
        return Poly(tuple(cs))

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        cs = np.convolve(np.asarray(self.coeffs), np.asarray(other.coeffs))
        return Poly(tuple(cs))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def max_abs_coeff(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def to_json(self) -> list:
        return list(self.coeffs)

    @staticmethod
    def from_json(data: Iterable[float]) -> "Poly":
        return Poly(tuple(float(c) for c in data))


@dataclass(frozen=True)
class Witness:
    """Grid point where the polynomial goes negative."""

    tau: float
    value: float


@dataclass(frozen=True)
class HandelmanCertificate:
    """Nonnegative-combination certificate of p - margin on [a, b].

    weights maps (i, j) with i + j <= order to c_ij >= 0 such that
    sum c_ij (t - a)^i (b - t)^j reproduces the certified polynomial.
    """

    interval: tuple[float, float]
    order: int
    weights: Mapping[tuple[int, int], float]

    def reconstruct(self) -> Poly:
        a, b = self.interval
        terms: list[list[float]] = []
        maxdeg = 0
        for (i, j), c in self.weights.items():
            p = ((Poly((-a, 1.0)) ** i) * (Poly((b, -1.0)) ** j)).scale(c)
            terms.append(list(p.coeffs))
            maxdeg = max(maxdeg, p.degree)
        out = []
        for k in range(maxdeg + 1):
            out.append(math.fsum(t[k] for t in terms if k < len(t)))
        return Poly(tuple(out)) if out else Poly.const(0.0)

    def validate(self, target: Poly, tol: float = 1e-9) -> bool:
        """Weights nonnegative and reconstruction matches target coefficientwise."""
        if any(c < 0 for c in self.weights.values()):
            return False
        diff = self.reconstruct() - target
        return diff.max_abs_coeff() <= tol


def handelman_basis(a: float, b: float, order: int) -> list[tuple[tuple[int, int], Poly]]:
    """All products (t-a)^i (b-t)^j with i + j <= order, as expanded polynomials."""
    if not a < b:
        raise InvalidInterval(f"need a < b, got [{a}, {b}]")
    left = Poly((-a, 1.0))
    right = Poly((b, -1.0))
    basis = []
    for i in range(order + 1):
        for j in range(order + 1 - i):
            basis.append(((i, j), (left**i) * (right**j)))
    return basis


def _certify_at_order(p: Poly, a: float, b: float, order: int, margin: float):
    # Solve in the normalized variable s = (t - a)/(b - a) for conditioning,
    # then map weights back: c_ij = c~_ij / h^(i+j).
    from .errors import NumericalFailure
    from .lp import LinearProgram, lp_solve

    h = b - a
    q = (p - Poly.const(margin)).shift_scale_arg(a, h)
    ncoef = order + 1
    pairs = [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]
    basis = {ij: (Poly((0.0, 1.0)) ** ij[0]) * (Poly((1.0, -1.0)) ** ij[1]) for ij in pairs}
    lp = LinearProgram(num_vars=len(pairs))
    for v in range(len(pairs)):
        lp.set_bounds(v, 0.0, None)
    for k in range(ncoef):
        row = {}
        for v, ij in enumerate(pairs):
            bc = basis[ij].coeffs
            if k < len(bc) and bc[k] != 0.0:
                row[v] = bc[k]
        rhs = q.coeffs[k] if k < len(q.coeffs) else 0.0
        lp.add_eq(row, rhs)
    try:
        sol = lp_solve(lp)
    except NumericalFailure:
        # borderline orders can defeat the solver; escalation treats this as a miss
        return None
    if sol.status != "Optimal":
        return None
    weights = {}
    for v, (i, j) in enumerate(pairs):
        c = max(sol.x[v], 0.0) / h ** (i + j)
        if c != 0.0:
            weights[(i, j)] = c
    return HandelmanCertificate(interval=(a, b), order=order, weights=weights)


def certify_nonneg(
    p: Poly,
    interval: tuple[float, float],
    order: Optional[int] = None,
    margin: float = 0.0,
) -> HandelmanCertificate:
    """Certify p >= margin on [a, b]; raises NoCertificate if the LP stays infeasible.

    With order=None the relaxation order starts at degree+4 and escalates to
    degree+10 before giving up.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise InvalidInterval(f"need a < b, got [{a}, {b}]")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if order is not None:
        orders = [max(int(order), p.degree)]
    else:
        orders = [p.degree + r for r in (4, 6, 8, 10)]
    for d in orders:
        cert = _certify_at_order(p, a, b, d, margin)
        if cert is not None:
            return cert
    raise NoCertificate(f"no order-{orders[-1]} certificate for p >= {margin} on [{a}, {b}]")


def falsify_nonneg(
    p: Poly, interval: tuple[float, float], grid_points: int = 10_000
) -> Optional[Witness]:
    """Uniform-grid referee: a Witness where p < 0, or None if the grid minimum is >= 0."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    a, b = float(interval[0]), float(interval[1])
    taus = np.linspace(a, b, grid_points)
    vals = p.eval(taus)
    k = int(np.argmin(vals))
    if vals[k] < 0.0:
        return Witness(tau=float(taus[k]), value=float(vals[k]))
    return None
