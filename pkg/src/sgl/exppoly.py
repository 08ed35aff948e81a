"""Complex polynomials and exp-polynomials ``sum_j c_j z^k_j e^{Q_j(z)}``."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import DomainError
from .scaled import ScaledComplex, scaled_sum

NEG_INF = float("-inf")


def _trim(coeffs: Iterable[complex]) -> tuple[complex, ...]:
    c = [complex(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class ComplexPoly:
    """Polynomial with ``coeffs[i]`` the coefficient of ``z**i``."""

    coeffs: tuple[complex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def z(cls) -> "ComplexPoly":
        return cls((0, 1))

    @classmethod
    def const(cls, c: complex) -> "ComplexPoly":
        return cls((c,))

    @classmethod
    def monomial(cls, c: complex, k: int) -> "ComplexPoly":
        return cls((0,) * k + (c,))

    def degree(self):
        """Index of the last nonzero coefficient; ``-inf`` for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else NEG_INF

    @property
    def leading(self) -> complex:
        return self.coeffs[-1] if self.coeffs else 0j

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def coeff(self, i: int) -> complex:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else 0j

    def __call__(self, z: complex) -> complex:
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def __add__(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return ComplexPoly(tuple(self.coeff(i) + other.coeff(i) for i in range(n)))

    def __neg__(self) -> "ComplexPoly":
        return ComplexPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "ComplexPoly") -> "ComplexPoly":
        return self + (-other)

    def __mul__(self, other) -> "ComplexPoly":
        if not isinstance(other, ComplexPoly):
            return ComplexPoly(tuple(c * other for c in self.coeffs))
        if self.is_zero() or other.is_zero():
            return ComplexPoly()
        out = [0j] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return ComplexPoly(tuple(out))

    __rmul__ = __mul__

    def derivative(self) -> "ComplexPoly":
        return ComplexPoly(tuple(i * c for i, c in enumerate(self.coeffs) if i > 0))

    def without_constant(self) -> "ComplexPoly":
        return ComplexPoly((0j,) + self.coeffs[1:]) if self.coeffs else self

    def sort_key(self):
        return (len(self.coeffs), tuple((c.real, c.imag) for c in self.coeffs))

    def __repr__(self):
        return f"ComplexPoly({render_poly(self)})"


class Term(NamedTuple):
    """One summand ``c * z**k * exp(Q(z))``; ``Q(0) == 0`` after normalization."""

    c: complex
    k: int
    Q: ComplexPoly


def _normalize_terms(terms: Iterable[Sequence]) -> tuple[Term, ...]:
    merged: dict[tuple[int, ComplexPoly], complex] = {}
    order: list[tuple[int, ComplexPoly]] = []
    for c, k, Q in terms:
        if not isinstance(Q, ComplexPoly):
            Q = ComplexPoly(Q)
        k = int(k)
        if k < 0:
            raise DomainError("negative power of z in exp-polynomial term")
        c = complex(c)
        q0 = Q.coeff(0)
        if q0 != 0:
            c = c * cmath.exp(q0)
            Q = Q.without_constant()
        key = (k, Q)
        if key not in merged:
            merged[key] = 0j
            order.append(key)
        merged[key] += c
    out = [Term(merged[key], key[0], key[1]) for key in order if merged[key] != 0]
    out.sort(key=lambda t: (t.Q.sort_key(), t.k))
    return tuple(out)


@dataclass(frozen=True)
class ExpPoly:
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _normalize_terms(self.terms))

    # constructors -------------------------------------------------------------
    @classmethod
    def const(cls, c: complex) -> "ExpPoly":
        return cls(((c, 0, ComplexPoly()),))

    @classmethod
    def z(cls) -> "ExpPoly":
        return cls(((1, 1, ComplexPoly()),))

    @classmethod
    def from_poly(cls, p: ComplexPoly) -> "ExpPoly":
        return cls(tuple((c, i, ComplexPoly()) for i, c in enumerate(p.coeffs)))

    @classmethod
    def exp_of(cls, p: ComplexPoly, c: complex = 1.0) -> "ExpPoly":
        return cls(((c, 0, p),))

    # structure ----------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_polynomial(self) -> bool:
        return all(t.Q.is_zero() for t in self.terms)

    def as_poly(self) -> ComplexPoly:
        if not self.is_polynomial():
            raise DomainError("exp-polynomial has non-trivial exponential factors")
        n = max((t.k for t in self.terms), default=-1) + 1
        coeffs = [0j] * n
        for t in self.terms:
            coeffs[t.k] += t.c
        return ComplexPoly(tuple(coeffs))

    def exponents(self) -> tuple[ComplexPoly, ...]:
        seen = []
        for t in self.terms:
            if t.Q not in seen:
                seen.append(t.Q)
        return tuple(seen)

    def grouped(self) -> dict[ComplexPoly, ComplexPoly]:
        """Map each exponent Q to the polynomial prefactor multiplying ``e^Q``."""
        out: dict[ComplexPoly, ComplexPoly] = {}
        for t in self.terms:
            out[t.Q] = out.get(t.Q, ComplexPoly()) + ComplexPoly.monomial(t.c, t.k)
        return out

    # algebra ------------------------------------------------------------------
    def __add__(self, other) -> "ExpPoly":
        other = _coerce(other)
        return ExpPoly(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "ExpPoly":
        return ExpPoly(tuple((-t.c, t.k, t.Q) for t in self.terms))

    def __sub__(self, other) -> "ExpPoly":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "ExpPoly":
        return _coerce(other) - self

    def __mul__(self, other) -> "ExpPoly":
        other = _coerce(other)
        return ExpPoly(tuple(
            (a.c * b.c, a.k + b.k, a.Q + b.Q) for a in self.terms for b in other.terms
        ))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "ExpPoly":
        if not isinstance(n, int) or n < 0:
            raise DomainError("only non-negative integer powers are supported")
        out = ExpPoly.const(1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def times_exp(self, P: ComplexPoly) -> "ExpPoly":
        return ExpPoly(tuple((t.c, t.k, t.Q + P) for t in self.terms))

    # evaluation ---------------------------------------------------------------
    def __call__(self, z: complex) -> complex:
        """Naive complex evaluation; overflows for large Re Q(z)."""
        z = complex(z)
        return sum((t.c * z ** t.k * cmath.exp(t.Q(z)) for t in self.terms), 0j)

    def __repr__(self):
        return f"ExpPoly({render(self)})"


def _coerce(x) -> ExpPoly:
    if isinstance(x, ExpPoly):
        return x
    if isinstance(x, ComplexPoly):
        return ExpPoly.from_poly(x)
    return ExpPoly.const(x)


def evaluate(e: ExpPoly, z) -> ScaledComplex:
    """Value of ``e`` at ``z`` (complex or ScaledComplex) in scaled form.

    Each term is formed as ``log|c| + k log|z| + Re Q(z)`` with its phase, and
    the sum factors out the largest term, so ``e^{Q}`` never overflows.
    """
    if isinstance(z, ScaledComplex):
        z = z.to_complex()
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError("z must be finite")
    parts = []
    zs = ScaledComplex.from_complex(z)
    for t in e.terms:
        if t.k > 0 and z == 0:
            continue
        # c z^k is formed by exact-exponent products; only e^{Q} goes through log/phase
        v = ScaledComplex.from_complex(t.c)
        if t.k:
            v = v * zs ** t.k
        if not t.Q.is_zero():
            q = t.Q(z)
            v = v * ScaledComplex.from_log_phase(q.real, math.remainder(q.imag, 2 * math.pi))
        parts.append(v)
    return scaled_sum(parts)


def exact_order(e: ExpPoly) -> int:
    """Order of growth of a non-zero exp-polynomial: the largest exponent degree."""
    if e.is_zero():
        raise DomainError("the zero function has no order")
    return max(max(t.Q.degree(), 0) for t in e.terms)


# --- rendering --------------------------------------------------------------------


def render_number(c: complex) -> str:
    c = complex(c)
    return f"({c.real!r}{'+' if c.imag >= 0 or math.isnan(c.imag) else '-'}{abs(c.imag)!r}i)"


def render_poly(p: ComplexPoly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for i, c in enumerate(p.coeffs):
        if c == 0:
            continue
        parts.append(render_number(c) if i == 0 else f"{render_number(c)}*z^{i}")
    return " + ".join(parts)


def render(e: ExpPoly) -> str:
    """Text form accepted by :func:`sgl.parser.parse_exppoly`."""
    if e.is_zero():
        return "0"
    parts = []
    for t in e.terms:
        s = render_number(t.c)
        if t.k:
            s += f"*z^{t.k}"
        if not t.Q.is_zero():
            s += "*e^{" + render_poly(t.Q) + "}"
        parts.append(s)
    return " + ".join(parts)
