"""Azimuth localization from orthogonal walk-crossing durations.

The observable is the orthogonal ratio: the duration of significant
attenuation while walking a path through the receiver, divided by the
duration while walking the orthogonal path away from it.  Both paths
cross the first Fresnel zone of the camera-receiver link, so the ratio
depends only on the azimuth of the camera relative to the first path
and not on the (unknown) walking speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

#: Fallback wavelength when the WiFi channel is unknown (2.4 GHz band).
DEFAULT_WAVELENGTH_M = 0.125

#: Solutions below this angle are reported as clamped; the model is
#: unreliable when the first path nearly coincides with the LOS.
THETA_MIN_DEG = 0.5

DEFAULT_QUADRANT_THRESHOLD = 0.6


@dataclass(frozen=True)
class ModelParams:
    """Fixed parameters of the azimuth model.

    d is the assumed camera-receiver distance and body_size the assumed
    obstacle diameter; both are deliberately fixed instead of measured,
    the ratio formulation keeps the induced error bounded.
    """

    d: float = 3.0
    body_size: float = 0.25
    wavelength: float = DEFAULT_WAVELENGTH_M

    def __post_init__(self) -> None:
        if not (self.d > 0.0 and math.isfinite(self.d)):
            raise ValueError(f"d must be positive, got {self.d!r}")
        if not (self.body_size >= 0.0 and math.isfinite(self.body_size)):
            raise ValueError(f"body_size must be >= 0, got {self.body_size!r}")
        if not (self.wavelength > 0.0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength!r}")


@dataclass(frozen=True)
class AzimuthEstimate:
    """Final localization output: angle in (0, 180), plus diagnostics."""

    theta_deg: float
    quadrant: int
    orthogonal_ratio: float
    solver_iterations: int
    clamped: bool

    def __post_init__(self) -> None:
        if self.quadrant not in (1, 2):
            raise ValueError(f"quadrant must be 1 or 2, got {self.quadrant!r}")
        if not (0.0 < self.theta_deg < 180.0):
            raise ValueError(f"theta_deg must be in (0, 180), got {self.theta_deg!r}")
        if not (self.orthogonal_ratio > 0.0):
            raise ValueError("orthogonal_ratio must be positive")
        if (self.quadrant == 1) != (self.theta_deg <= 90.0):
            raise ValueError("quadrant 1 requires theta_deg <= 90 and vice versa")


class SolveResult(NamedTuple):
    theta_deg: float
    iterations: int
    clamped: bool


def wavelength_from_channel(channel: int | None) -> float:
    """Carrier wavelength for a 2.4 GHz channel number, meters.

    Channels 1-13 map to 2412-2472 MHz; anything else falls back to the
    default band-center wavelength.
    """
    if channel is not None and 1 <= channel <= 13:
        freq_hz = (2407 + 5 * channel) * 1e6
        return SPEED_OF_LIGHT / freq_hz
    return DEFAULT_WAVELENGTH_M


def _numerator(p: ModelParams) -> float:
    return p.wavelength * p.wavelength + 4.0 * p.d * p.wavelength


def lf1(theta: float, p: ModelParams) -> float:
    """Forward crossing length of the through-path, receiver to zone edge.

    theta is the azimuth in radians, in (0, pi).
    """
    return _numerator(p) / (4.0 * (2.0 * p.d + p.wavelength - 2.0 * p.d * math.cos(theta)))


def lf2(theta: float, p: ModelParams) -> float:
    """Backward crossing length of the through-path (other side of Rx)."""
    return _numerator(p) / (4.0 * (2.0 * p.d + p.wavelength + 2.0 * p.d * math.cos(theta)))


def l2(theta: float, p: ModelParams) -> float:
    """Crossing length of the orthogonal path, which starts at the receiver."""
    return _numerator(p) / (4.0 * (2.0 * p.d + p.wavelength - 2.0 * p.d * math.sin(theta)))


def orthogonal_ratio(theta: float, p: ModelParams) -> float:
    """Forward model R(theta) = (body + lf1 + lf2) / l2, theta in radians.

    Built from the component crossing lengths; strictly decreasing on
    (0, 90 deg] and symmetric about 90 deg.
    """
    return (p.body_size + lf1(theta, p) + lf2(theta, p)) / l2(theta, p)


def _ratio_and_derivative(theta: float, p: ModelParams) -> tuple[float, float]:
    n = _numerator(p)
    lam, d = p.wavelength, p.d
    d1 = 2.0 * d + lam - 2.0 * d * math.cos(theta)
    d2 = 2.0 * d + lam + 2.0 * d * math.cos(theta)
    d3 = 2.0 * d + lam - 2.0 * d * math.sin(theta)
    f1 = n / (4.0 * d1)
    f2 = n / (4.0 * d2)
    g = n / (4.0 * d3)
    # d/dtheta of each component length
    f1p = -f1 / d1 * (2.0 * d * math.sin(theta))
    f2p = f2 / d2 * (2.0 * d * math.sin(theta))
    gp = g / d3 * (2.0 * d * math.cos(theta))
    num = p.body_size + f1 + f2
    ratio = num / g
    dratio = (f1p + f2p) / g - num * gp / (g * g)
    return ratio, dratio


def solve_azimuth(
    r_o: float,
    p: ModelParams,
    theta_min_deg: float = THETA_MIN_DEG,
    tol: float = 1e-9,
    max_iter: int = 100,
) -> SolveResult:
    """Invert the orthogonal ratio to an azimuth in (0, 90] degrees.

    Newton-Raphson seeded at 45 deg with a bisection fallback; the ratio
    is strictly decreasing on the bracket so the root is unique.  Ratios
    outside the attainable range clamp to the nearest endpoint and are
    flagged.
    """
    if not (math.isfinite(r_o) and r_o > 0.0):
        raise ValueError(f"orthogonal ratio must be positive and finite, got {r_o!r}")
    lo = math.radians(theta_min_deg)
    hi = math.pi / 2.0
    r_hi = orthogonal_ratio(hi, p)
    if r_o == r_hi:
        return SolveResult(90.0, 0, False)
    if r_o < r_hi:
        return SolveResult(90.0, 0, True)
    r_lo = orthogonal_ratio(lo, p)
    if r_o >= r_lo:
        return SolveResult(theta_min_deg, 0, True)

    theta = math.radians(45.0)
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        f, fp = _ratio_and_derivative(theta, p)
        f -= r_o
        # shrink the bracket; f is decreasing in theta
        if f > 0.0:
            lo = theta
        else:
            hi = theta
        if fp != 0.0:
            step = -f / fp
            candidate = theta + step
        else:
            candidate = math.nan
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        delta = candidate - theta
        theta = candidate
        if abs(f) < tol and abs(delta) < 1e-12:
            break
    return SolveResult(math.degrees(theta), iterations, False)


def determine_quadrant(
    extent_csi1: float,
    extent_csi3: float,
    t_q: float = DEFAULT_QUADRANT_THRESHOLD,
) -> int:
    """Pick quadrant 2 when the third walk barely disturbed the link.

    Returns 2 if extent_csi3 < t_q * extent_csi1, else 1; ties go to
    quadrant 1 (strict inequality).
    """
    if not (extent_csi1 > 0.0 and extent_csi3 > 0.0):
        raise ValueError("fluctuation extents must be positive")
    if not (0.0 < t_q <= 1.0):
        raise ValueError(f"t_q must be in (0, 1], got {t_q!r}")
    return 2 if extent_csi3 < t_q * extent_csi1 else 1


def finalize_azimuth(theta_deg: float, quadrant: int) -> float:
    """Fold the (0, 90] solution into (0, 180) using the quadrant."""
    if not (0.0 < theta_deg <= 90.0):
        raise ValueError(f"theta_deg must be in (0, 90], got {theta_deg!r}")
    if quadrant == 1:
        return theta_deg
    if quadrant == 2:
        return 180.0 - theta_deg
    raise ValueError(f"quadrant must be 1 or 2, got {quadrant!r}")


def crossing_length_oracle(
    p: ModelParams,
    heading_rad: float,
    s_start: float,
    s_stop: float,
    step: float = 1e-4,
) -> float:
    """Brute-force length of a straight path inside the first Fresnel zone.

    The path runs through the receiver (s = 0) at ``heading_rad`` from
    the LOS; the transmitter sits at distance d along the LOS.  Samples
    the ellipse condition |TxQ| + |QRx| - |TxRx| <= lambda/2 on a fine
    grid and refines every boundary crossing by bisection.  Slow by
    design; used as the independent geometric check of the closed-form
    crossing lengths.
    """
    if s_stop <= s_start:
        raise ValueError("empty path range")
    lam, d = p.wavelength, p.d
    cos_h, sin_h = math.cos(heading_rad), math.sin(heading_rad)

    def excess(s: float) -> float:
        qx = s * cos_h
        qy = s * sin_h
        return math.hypot(qx - d, qy) + abs(s) - d - lam / 2.0

    n = max(int(math.ceil((s_stop - s_start) / step)), 2)
    grid = np.linspace(s_start, s_stop, n + 1)
    qx = grid * cos_h
    qy = grid * sin_h
    inside = (np.hypot(qx - d, qy) + np.abs(grid) - d) <= lam / 2.0

    def refine(a: float, b: float) -> float:
        # excess changes sign on [a, b]
        fa = excess(a)
        for _ in range(60):
            m = 0.5 * (a + b)
            fm = excess(m)
            if (fa < 0.0) == (fm < 0.0):
                a, fa = m, fm
            else:
                b = m
        return 0.5 * (a + b)

    total = 0.0
    entry: float | None = grid[0] if inside[0] else None
    for i in range(1, len(grid)):
        if inside[i] and not inside[i - 1]:
            entry = refine(float(grid[i - 1]), float(grid[i]))
        elif not inside[i] and inside[i - 1]:
            assert entry is not None
            total += refine(float(grid[i - 1]), float(grid[i])) - entry
            entry = None
    if entry is not None:
        total += float(grid[-1]) - entry
    return total
