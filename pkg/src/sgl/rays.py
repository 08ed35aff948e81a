"""Critical rays of e^{P(z)} and the alternating sector partition.

For ``P(z) = a_n z^n + ...`` the sign of ``Re(a_n e^{i n theta})`` decides
whether ``e^{P}`` grows or decays along the ray ``arg z = theta``.  Everything
here depends on ``a_n`` and ``n`` only and is computed in closed form.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .exppoly import ComplexPoly

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12


class Membership(str, enum.Enum):
    E_PLUS_INTERIOR = "E_PLUS_INTERIOR"
    E_MINUS_INTERIOR = "E_MINUS_INTERIOR"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class Sector:
    lo: float
    hi: float
    sign: int

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class SectorPartition:
    """2n half-open sectors ``[lo, hi)``; the first one contains angle 0 (or starts at it)."""

    n: int
    leading: complex
    critical_angles: tuple[float, ...]
    sectors: tuple[Sector, ...]

    def sector_of(self, theta: float) -> Sector:
        base = self.sectors[0].lo
        t = base + (theta - base) % TWO_PI
        for s in self.sectors:
            if s.lo <= t < s.hi:
                return s
        return self.sectors[-1]


def _require_nonconstant(P: ComplexPoly) -> int:
    n = P.degree()
    if n == -math.inf or n < 1:
        raise DomainError("P must be a non-constant polynomial")
    return int(n)


def normalize_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0:
        t += TWO_PI
    return 0.0 if t >= TWO_PI else t


def delta(P: ComplexPoly, theta: float) -> float:
    """``Re(a_n e^{i n theta})``."""
    n = _require_nonconstant(P)
    return (P.leading * cmath.exp(1j * n * theta)).real


def critical_rays(P: ComplexPoly) -> list[float]:
    """The 2n angles in [0, 2pi) where ``delta(P, theta) == 0``, sorted."""
    n = _require_nonconstant(P)
    arg = cmath.phase(P.leading)
    angles = [normalize_angle((math.pi / 2 + k * math.pi - arg) / n) for k in range(2 * n)]
    return sorted(angles)


def partition(P: ComplexPoly) -> SectorPartition:
    n = _require_nonconstant(P)
    crit = critical_rays(P)
    if crit[0] <= ANGLE_TOL:
        bounds = crit + [crit[0] + TWO_PI]
    else:
        bounds = [crit[-1] - TWO_PI] + crit
    sectors = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        d = delta(P, 0.5 * (lo + hi))
        sectors.append(Sector(lo, hi, 1 if d > 0 else -1))
    return SectorPartition(n, P.leading, tuple(crit), tuple(sectors))


def _circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def membership(part: SectorPartition, theta: float) -> Membership:
    if any(_circular_distance(theta, c) <= ANGLE_TOL for c in part.critical_angles):
        return Membership.CRITICAL
    sign = part.sector_of(theta).sign
    return Membership.E_PLUS_INTERIOR if sign > 0 else Membership.E_MINUS_INTERIOR


def interior_rays(part: SectorPartition, per_sector: int, offset: float | None = None) -> list[tuple[float, Sector]]:
    """``per_sector`` evenly spaced rays per sector, kept ``offset`` away from its edges.

    The default offset is ``pi/(8n)``.  A single ray sits at the sector midpoint.
    """
    if per_sector < 1:
        raise DomainError("per_sector must be >= 1")
    if offset is None:
        offset = math.pi / (8 * part.n)
    out = []
    for s in part.sectors:
        lo, hi = s.lo + offset, s.hi - offset
        ts = [s.mid] if per_sector == 1 else list(np.linspace(lo, hi, per_sector))
        out.extend((normalize_angle(float(t)), s) for t in ts)
    return out
