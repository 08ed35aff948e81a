"""Complex numbers with a detached binary exponent.

A value is ``mantissa * 2**exponent`` where the larger of ``|Re mantissa|`` and
``|Im mantissa|`` lies in ``[0.5, 1)``.  The exponent is an unbounded Python int
for scalars and an int64 for the array helpers, so magnitudes such as
``exp(1e15)`` or ``1/5000!`` are representable without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

LN2 = math.log(2.0)

# exponent used for zero entries in the array form; far below any real exponent
ZERO_EXP = -(2 ** 62)
_MIN_SHIFT = -2000


def _normalize(re: float, im: float, exponent: int) -> tuple[complex, int]:
    a = max(abs(re), abs(im))
    if a == 0.0:
        return 0j, 0
    if not math.isfinite(a):
        raise OverflowError("non-finite mantissa")
    _, ex = math.frexp(a)
    return complex(math.ldexp(re, -ex), math.ldexp(im, -ex)), exponent + ex


@dataclass(frozen=True)
class ScaledComplex:
    mantissa: complex = 0j
    exponent: int = 0

    @classmethod
    def from_complex(cls, z: complex) -> "ScaledComplex":
        z = complex(z)
        m, e = _normalize(z.real, z.imag, 0)
        return cls(m, e)

    @classmethod
    def from_log_phase(cls, magnitude_log: float, phase: float) -> "ScaledComplex":
        if magnitude_log == -math.inf:
            return cls()
        if not math.isfinite(magnitude_log):
            raise OverflowError("magnitude_log must be finite or -inf")
        e = math.floor(magnitude_log / LN2)
        mag = math.exp(magnitude_log - e * LN2)
        m, e = _normalize(mag * math.cos(phase), mag * math.sin(phase), e)
        return cls(m, e)

    @classmethod
    def from_gaussian_int(cls, re: int, im: int, shift: int = 0) -> "ScaledComplex":
        """Value of ``(re + i*im) * 2**-shift`` for arbitrary-size ints."""
        b = max(abs(re).bit_length(), abs(im).bit_length())
        if b == 0:
            return cls()
        drop = max(b - 62, 0)
        m, e = _normalize(float(re >> drop), float(im >> drop), drop - shift)
        return cls(m, e)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    @property
    def magnitude_log(self) -> float:
        if self.is_zero:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.exponent * LN2

    @property
    def phase(self) -> float:
        if self.is_zero:
            return 0.0
        p = math.atan2(self.mantissa.imag, self.mantissa.real)
        return math.pi if p == -math.pi else p

    def to_complex(self) -> complex:
        m = self.mantissa
        return complex(math.ldexp(m.real, self.exponent), math.ldexp(m.imag, self.exponent))

    def __mul__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if self.is_zero or other.is_zero:
            return ScaledComplex()
        p = self.mantissa * other.mantissa
        m, e = _normalize(p.real, p.imag, self.exponent + other.exponent)
        return ScaledComplex(m, e)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        if other.is_zero:
            raise ZeroDivisionError("division by scaled zero")
        if self.is_zero:
            return ScaledComplex()
        q = self.mantissa / other.mantissa
        m, e = _normalize(q.real, q.imag, self.exponent - other.exponent)
        return ScaledComplex(m, e)

    def __add__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        return scaled_sum((self, other))

    __radd__ = __add__

    def __neg__(self):
        return ScaledComplex(-self.mantissa, self.exponent)

    def __sub__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.from_complex(other)
        return self + (-other)

    def __abs__(self):
        return ScaledComplex(complex(abs(self.mantissa)), self.exponent)._renorm()

    def __pow__(self, k: int):
        if k < 0:
            return ScaledComplex.from_complex(1.0) / (self ** (-k))
        out = ScaledComplex.from_complex(1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def _renorm(self):
        m, e = _normalize(self.mantissa.real, self.mantissa.imag, self.exponent)
        return ScaledComplex(m, e)

    def __repr__(self):
        if self.is_zero:
            return "ScaledComplex(0)"
        return f"ScaledComplex(log|.|={self.magnitude_log:.12g}, arg={self.phase:.12g})"


def scaled_sum(values: Iterable[ScaledComplex]) -> ScaledComplex:
    """Sum with the largest binary exponent factored out before adding."""
    vals = [v for v in values if not v.is_zero]
    if not vals:
        return ScaledComplex()
    emax = max(v.exponent for v in vals)
    re = math.fsum(math.ldexp(v.mantissa.real, max(v.exponent - emax, _MIN_SHIFT)) for v in vals)
    im = math.fsum(math.ldexp(v.mantissa.imag, max(v.exponent - emax, _MIN_SHIFT)) for v in vals)
    m, e = _normalize(re, im, emax)
    return ScaledComplex(m, e)


# --- array form -----------------------------------------------------------------
# (mant: complex128 array, exp: int64 array); zeros carry exp == ZERO_EXP.


def normalize(mant: np.ndarray, exp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mant = np.asarray(mant, dtype=complex)
    exp = np.asarray(exp, dtype=np.int64)
    a = np.maximum(np.abs(mant.real), np.abs(mant.imag))
    _, ex = np.frexp(a)
    ex = ex.astype(np.int64)
    m = np.ldexp(mant.real, -ex) + 1j * np.ldexp(mant.imag, -ex)
    zero = a == 0
    e = np.where(zero, ZERO_EXP, exp + ex)
    m = np.where(zero, 0j, m)
    return m, e


def from_complex_array(values) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=complex)
    return normalize(v, np.zeros(v.shape, dtype=np.int64))


def from_log_phase_array(logmag, phase) -> tuple[np.ndarray, np.ndarray]:
    logmag = np.asarray(logmag, dtype=float)
    phase = np.asarray(phase, dtype=float)
    zero = ~np.isfinite(logmag)
    lm = np.where(zero, 0.0, logmag)
    e = np.floor(lm / LN2)
    mag = np.exp(lm - e * LN2)
    m = np.where(zero, 0j, mag * np.exp(1j * phase))
    return normalize(m, e.astype(np.int64))


def log_abs(mant: np.ndarray, exp: np.ndarray) -> np.ndarray:
    mant = np.asarray(mant)
    out = np.full(mant.shape, -np.inf)
    nz = mant != 0
    out[nz] = np.log(np.abs(mant[nz])) + np.asarray(exp)[nz] * LN2
    return out


def phase(mant: np.ndarray) -> np.ndarray:
    p = np.angle(np.asarray(mant))
    return np.where(p == -np.pi, np.pi, p)


def vsum(mant: np.ndarray, exp: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Scaled sum along ``axis``."""
    mant = np.asarray(mant)
    exp = np.asarray(exp)
    emax = np.max(exp, axis=axis, keepdims=True)
    shift = np.maximum(exp - emax, _MIN_SHIFT)
    s = np.sum(np.ldexp(mant.real, shift) + 1j * np.ldexp(mant.imag, shift), axis=axis)
    return normalize(s, np.squeeze(emax, axis=axis))


def vmul(m1, e1, m2, e2) -> tuple[np.ndarray, np.ndarray]:
    return normalize(np.asarray(m1) * np.asarray(m2), np.asarray(e1) + np.asarray(e2))


def to_scalar(m, e) -> ScaledComplex:
    m = complex(m)
    if m == 0:
        return ScaledComplex()
    return ScaledComplex(m, int(e))
