"""First-Fresnel-zone geometry and knife-edge diffraction.

All offsets ``h`` are signed perpendicular distances from the
transmitter-receiver line, in meters.  Gains are field gains in dB
relative to the unobstructed link (0 dB = no obstruction).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import NamedTuple

SQRT2 = math.sqrt(2.0)

#: Clamp for near-total obstruction, keeps -inf out of downstream math.
GAIN_FLOOR_DB = -80.0

# Series/continued-fraction crossover for the Fresnel cosine/sine integrals.
_SERIES_CUTOFF = 1.6
_CF_MAX_ITER = 300
_CF_EPS = 1e-15
# Beyond this the oscillation phase pi*x^2/2 is meaningless in doubles.
_ASYMPTOTIC_CUTOFF = 1.0e7


class GeometryError(ValueError):
    """Degenerate or non-physical link geometry."""


@dataclass(frozen=True)
class LinkGeometry:
    """Link split around an obstacle's projection onto the LOS.

    Attributes:
        wavelength: carrier wavelength in meters.
        d1: distance from the projection point to the transmitter, meters.
        d2: distance from the projection point to the receiver, meters.
    """

    wavelength: float
    d1: float
    d2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.wavelength) and self.wavelength > 0.0):
            raise GeometryError(f"wavelength must be positive, got {self.wavelength!r}")
        if not (math.isfinite(self.d1) and math.isfinite(self.d2)):
            raise GeometryError("d1/d2 must be finite")
        if self.d1 <= 0.0 or self.d2 <= 0.0:
            raise GeometryError(f"d1 and d2 must be positive, got d1={self.d1}, d2={self.d2}")


@dataclass(frozen=True)
class CylinderObstacle:
    """Opaque circular obstacle crossing the link, e.g. a human body.

    ``center_offset`` is the signed perpendicular distance of the cylinder
    axis from the LOS; the two shadowing edges sit at ``center_offset
    +/- radius``.
    """

    center_offset: float
    radius: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise GeometryError(f"radius must be positive, got {self.radius!r}")
        if not math.isfinite(self.center_offset):
            raise GeometryError("center_offset must be finite")

    @property
    def h_front(self) -> float:
        """Offset of the lower edge (center_offset - radius)."""
        return self.center_offset - self.radius

    @property
    def h_back(self) -> float:
        """Offset of the upper edge (center_offset + radius)."""
        return self.center_offset + self.radius


class CylinderGain(NamedTuple):
    gain_db: float
    clamped: bool


def ffz_radius(geom: LinkGeometry) -> float:
    """Radius of the first Fresnel zone at the projection point.

    r1 = sqrt(lambda * d1 * d2 / (d1 + d2)); strictly positive for a
    valid geometry.
    """
    total = geom.d1 + geom.d2
    if total <= 0.0:
        raise GeometryError("d1 + d2 must be positive")
    return math.sqrt(geom.wavelength * geom.d1 * geom.d2 / total)


def clearance_u(h: float, geom: LinkGeometry) -> float:
    """Fresnel clearance u = h / r1 (fraction of the zone radius)."""
    return h / ffz_radius(geom)


def kirchhoff_v(h: float, geom: LinkGeometry) -> float:
    """Diffraction parameter v = h * sqrt(2 (d1+d2) / (lambda d1 d2)).

    Equal to sqrt(2) * clearance_u(h, geom); carries the sign of h.
    """
    return h * SQRT2 / ffz_radius(geom)


def _fresnel_cs_series(x: float) -> tuple[float, float]:
    # Maclaurin series of C(x), S(x); converges quickly below the cutoff.
    a = 0.5 * math.pi
    x2 = x * x
    x4 = x2 * x2
    term_c = x                 # (-1)^k a^(2k) x^(4k+1) / (2k)!
    term_s = a * x2 * x        # (-1)^k a^(2k+1) x^(4k+3) / (2k+1)!
    c_sum = 0.0
    s_sum = 0.0
    k = 0
    while True:
        c_sum += term_c / (4 * k + 1)
        s_sum += term_s / (4 * k + 3)
        term_c *= -a * a * x4 / ((2 * k + 1) * (2 * k + 2))
        term_s *= -a * a * x4 / ((2 * k + 2) * (2 * k + 3))
        k += 1
        if abs(term_c) + abs(term_s) < 1e-18 * (abs(c_sum) + abs(s_sum) + 1e-30):
            return c_sum, s_sum
        if k > 80:  # unreachable below the cutoff; guards against misuse
            return c_sum, s_sum


def _fresnel_cs_cf(x: float) -> tuple[float, float]:
    # Complex continued fraction (modified Lentz) for x above the cutoff.
    # Evaluates the tail integral of exp(j pi t^2 / 2) and folds it back
    # onto C + jS; full double accuracy down to x ~ 1.
    pix2 = math.pi * x * x
    b = complex(1.0, -pix2)
    tiny = 1e-30
    c = complex(1.0 / tiny, 0.0)
    d = 1.0 / b
    h = d
    n = -1
    for _ in range(_CF_MAX_ITER):
        n += 2
        a = -n * (n + 1)
        b += 4.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < _CF_EPS:
            break
    h *= complex(x, -x)
    phase = cmath.exp(complex(0.0, 0.5 * pix2))
    cs = complex(0.5, 0.5) * (1.0 - phase * h)
    return cs.real, cs.imag


def fresnel_cs(x: float) -> tuple[float, float]:
    """Fresnel cosine and sine integrals C(x), S(x).

    C(x) = int_0^x cos(pi t^2 / 2) dt and S(x) likewise with sin.  Power
    series below |x| = 1.6, continued fraction above; both branches are
    accurate to ~1e-15 so no seam is visible at the crossover.
    """
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x!r}")
    ax = abs(x)
    if ax < 1e-30:
        return 0.0, 0.0
    if ax >= _ASYMPTOTIC_CUTOFF:
        cc, ss = 0.5, 0.5
    elif ax <= _SERIES_CUTOFF:
        cc, ss = _fresnel_cs_series(ax)
    else:
        cc, ss = _fresnel_cs_cf(ax)
    if x < 0.0:
        return -cc, -ss
    return cc, ss


def fresnel_integral_F(v: float) -> complex:
    """Complex field ratio F(v) = (1+j)/2 * int_v^inf exp(-j pi t^2/2) dt.

    F(v) -> 1 for v -> -inf (clear path), 0.5 at v = 0 (grazing edge) and
    0 for v -> +inf (deep shadow).  Satisfies F(-v) = 1 - F(v).
    """
    c, s = fresnel_cs(v)
    return complex(0.5, 0.5) * complex(0.5 - c, -(0.5 - s))


def knife_edge_gain_db(v: float) -> float:
    """Single knife-edge diffraction gain 20*log10|F(v)| in dB."""
    mag = abs(fresnel_integral_F(v))
    # |F| never vanishes for finite v; the max() is numeric paranoia only.
    return 20.0 * math.log10(max(mag, 1e-300))


def cylinder_field(obstacle: CylinderObstacle, geom: LinkGeometry) -> complex:
    """Complex field ratio past an opaque cylinder.

    The received field is the sum of the two un-shadowed half-plane
    contributions: below the lower edge and above the upper edge.  A
    vanishing cylinder gives exactly 1 (no attenuation), and the result
    tends to 1 again as the cylinder recedes from the zone on either side.
    """
    v_front = kirchhoff_v(obstacle.h_front, geom)
    v_back = kirchhoff_v(obstacle.h_back, geom)
    # Lower-side contribution via the reflection identity F(-v) = 1 - F(v).
    return fresnel_integral_F(-v_front) + fresnel_integral_F(v_back)


def cylinder_gain_db(
    obstacle: CylinderObstacle,
    geom: LinkGeometry,
    floor_db: float = GAIN_FLOOR_DB,
) -> CylinderGain:
    """Diffraction gain of a cylinder crossing the link, clamped at a floor.

    Returns the gain in dB and whether the floor clamp fired (near-total
    obstruction).
    """
    mag = abs(cylinder_field(obstacle, geom))
    floor_mag = 10.0 ** (floor_db / 20.0)
    if mag <= floor_mag:
        return CylinderGain(floor_db, True)
    return CylinderGain(20.0 * math.log10(mag), False)
