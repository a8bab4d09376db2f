"""CSI amplitude processing: attenuation windows and fluctuation extents.

Turns multi-subcarrier amplitude traces into the two crossing durations
that form the orthogonal ratio, plus the max/min fluctuation extents
used for quadrant determination.  All thresholds are relative, so every
operation is invariant under global amplitude scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class CsiError(ValueError):
    """Base class for CSI processing failures."""


class NoWindowError(CsiError):
    """The series shows no significant attenuation dip."""


class NoTransitionError(CsiError):
    """The series shows no level transition to anchor a half-path window."""


class PathSignalError(CsiError):
    """Window extraction failed for one of the walk paths."""

    def __init__(self, path: int, message: str) -> None:
        super().__init__(f"Path {path}: {message}")
        self.path = path


@dataclass
class CsiTrace:
    """Per-subcarrier amplitude time series at a fixed sample rate."""

    sample_rate_hz: float
    start_time: float
    amplitudes: np.ndarray  # [n_subcarriers, n_samples], linear amplitude
    mac: str | None = None
    channel: int | None = None

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.sample_rate_hz <= 0.0:
            raise CsiError(f"sample rate must be positive, got {self.sample_rate_hz!r}")
        if self.amplitudes.ndim != 2:
            raise CsiError("amplitudes must be a 2-D [subcarriers x samples] array")
        if not np.all(np.isfinite(self.amplitudes)) or np.any(self.amplitudes < 0.0):
            raise CsiError("amplitudes must be finite and non-negative")
        if self.n_samples < 2.0 * self.sample_rate_hz:
            raise CsiError("trace must cover at least 2 seconds")

    @property
    def n_subcarriers(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.amplitudes.shape[1])

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class AttenuationWindow:
    """One significant-attenuation interval, trace-relative seconds."""

    start_s: float
    end_s: float
    depth_db: float

    def __post_init__(self) -> None:
        if not (self.start_s < self.end_s):
            raise CsiError(f"window must have positive duration, got [{self.start_s}, {self.end_s}]")
        if self.depth_db > 0.0:
            raise CsiError("attenuation depth must be <= 0 dB")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class ProcessingConfig:
    """Tunables of the window-extraction pipeline.

    The defaults are calibrated so the noiseless simulator round-trips
    through the forward model; every knob stays exposed because real
    deployments re-calibrate against their own hardware.
    """

    smoothing_window_s: float = 0.2
    # crossing windows: edge threshold sits this fraction of the dip depth
    # below the baseline
    edge_fraction: float = 0.1
    # dip must reach below this fraction of baseline to count at all
    min_dip_fraction: float = 0.9
    # half-path windows: level estimates from these head/tail fractions
    level_fraction: float = 0.15
    # half-path ramp edges: samples within this fraction of the level swing
    edge_band: float = 0.10
    # protocol constant: the walker accelerates from rest over this long
    accel_time_s: float = 0.5
    # residual multiplicative correction on the half-path duration
    halfpath_gain: float = 1.0
    # windows longer than this fraction of the trace get inflated, the
    # walker likely ran out of room
    long_window_fraction: float = 0.6
    long_window_gain: float = 1.1
    extent_guard_s: float = 0.5
    quadrant_threshold: float = 0.6
    reference_subcarriers: int = 5

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


DEFAULT_PROCESSING = ProcessingConfig()


def moving_average(series: np.ndarray, sample_rate_hz: float, window_s: float) -> np.ndarray:
    """Centered moving average; window is forced odd so edges stay aligned."""
    x = np.asarray(series, dtype=float)
    w = int(round(window_s * sample_rate_hz))
    if w <= 1:
        return x.copy()
    if w % 2 == 0:
        w += 1
    padded = np.pad(x, w // 2, mode="edge")
    kernel = np.ones(w) / w
    return np.convolve(padded, kernel, mode="valid")


def select_reference_trace(trace: CsiTrace, cfg: ProcessingConfig = DEFAULT_PROCESSING) -> np.ndarray:
    """Mean of the strongest few subcarriers after low-pass smoothing.

    High-amplitude subcarriers carry the cleanest attenuation signature;
    traces with fewer subcarriers than requested fall back to all of them.
    """
    if trace.n_subcarriers == 0 or trace.n_samples == 0:
        raise CsiError("empty trace")
    k = min(cfg.reference_subcarriers, trace.n_subcarriers)
    means = trace.amplitudes.mean(axis=1)
    top = np.argsort(means)[::-1][:k]
    smoothed = np.stack(
        [moving_average(trace.amplitudes[i], trace.sample_rate_hz, cfg.smoothing_window_s) for i in top]
    )
    return smoothed.mean(axis=0)


def _interp_crossing(t0: float, t1: float, y0: float, y1: float, level: float) -> float:
    if y1 == y0:
        return t1
    frac = (level - y0) / (y1 - y0)
    return t0 + frac * (t1 - t0)


def extract_window_crossing(
    series: np.ndarray,
    sample_rate_hz: float,
    cfg: ProcessingConfig = DEFAULT_PROCESSING,
) -> AttenuationWindow:
    """Window of a full zone crossing: a dip below a flat baseline.

    Baseline is the median of the first second; the window edges are the
    threshold re-crossings on either side of the global minimum, with
    sub-sample interpolation.
    """
    x = np.asarray(series, dtype=float)
    rate = float(sample_rate_hz)
    if x.size < 2.0 * rate:
        raise CsiError("series must cover at least 2 seconds")
    head = max(int(round(rate)), 1)
    baseline = float(np.median(x[:head]))
    if baseline <= 0.0:
        raise NoWindowError("baseline is not positive")
    i_min = int(np.argmin(x))
    minimum = float(x[i_min])
    if minimum >= cfg.min_dip_fraction * baseline:
        raise NoWindowError("no significant attenuation below the baseline")
    threshold = baseline - cfg.edge_fraction * (baseline - minimum)

    before = np.nonzero(x[: i_min + 1] >= threshold)[0]
    if before.size:
        i = int(before[-1])
        start = _interp_crossing(i / rate, (i + 1) / rate, x[i], x[i + 1], threshold)
    else:
        start = 0.0
    after = np.nonzero(x[i_min:] >= threshold)[0]
    if after.size:
        j = i_min + int(after[0])
        end = _interp_crossing((j - 1) / rate, j / rate, x[j - 1], x[j], threshold)
    else:
        end = x.size / rate
    depth_db = 20.0 * math.log10(max(minimum, 1e-12 * baseline) / baseline)
    return AttenuationWindow(start, end, depth_db)


def _trapezoid_time_to_distance_time(t: float, accel_time_s: float) -> float:
    # Convert "time to reach the exit when starting from rest" into the
    # equivalent constant-speed time, given the protocol ramp duration.
    if accel_time_s <= 0.0:
        return t
    if t <= accel_time_s:
        return t * t / (2.0 * accel_time_s)
    return t - accel_time_s / 2.0


def extract_window_halfpath(
    series: np.ndarray,
    sample_rate_hz: float,
    cfg: ProcessingConfig = DEFAULT_PROCESSING,
) -> AttenuationWindow:
    """Window of a half crossing: walk starts inside the zone and leaves it.

    Fits a two-level piecewise-constant waveform (levels from the head and
    tail of the trace, breakpoint swept for least squared error), refines
    the breakpoint to the midpoint of the transition ramp, and reports the
    attenuated interval between the trace edge and that midpoint.  The
    duration is then corrected for the standing start using the protocol
    ramp time.
    """
    x = np.asarray(series, dtype=float)
    rate = float(sample_rate_hz)
    n = x.size
    if n < 2.0 * rate:
        raise CsiError("series must cover at least 2 seconds")
    k = max(int(math.ceil(cfg.level_fraction * n)), 1)
    pre = float(x[:k].mean())
    post = float(x[-k:].mean())
    head = max(int(round(rate)), 1)
    noise = float(np.std(x[:head]))
    scale = max(abs(pre), abs(post), 1e-30)
    if abs(pre - post) < max(3.0 * noise, 1e-6 * scale):
        raise NoTransitionError("head and tail levels are indistinguishable")

    # least-squares breakpoint against the fixed two-level waveform
    sq_pre = np.concatenate([[0.0], np.cumsum((x - pre) ** 2)])
    sq_post = np.concatenate([[0.0], np.cumsum((x - post) ** 2)])
    ks = np.arange(1, n)
    sse = sq_pre[ks] + (sq_post[n] - sq_post[ks])
    bp = int(ks[np.argmin(sse)])

    band = cfg.edge_band * abs(post - pre)
    before = np.nonzero(np.abs(x[:bp] - pre) <= band)[0]
    ramp_start = int(before[-1]) if before.size else 0
    after = np.nonzero(np.abs(x[bp:] - post) <= band)[0]
    ramp_end = bp + int(after[0]) if after.size else n - 1
    mid_t = 0.5 * (ramp_start + ramp_end) / rate

    low_first = pre < post
    raw = mid_t if low_first else (n / rate - mid_t)
    corrected = _trapezoid_time_to_distance_time(raw, cfg.accel_time_s) * cfg.halfpath_gain
    corrected = min(max(corrected, 1.0 / rate), n / rate)
    low, high = (pre, post) if low_first else (post, pre)
    depth_db = 20.0 * math.log10(max(low, 1e-12 * high) / high)
    if low_first:
        return AttenuationWindow(0.0, corrected, depth_db)
    return AttenuationWindow(n / rate - corrected, n / rate, depth_db)


def measure_orthogonal_ratio(
    trace1: CsiTrace,
    trace2: CsiTrace,
    cfg: ProcessingConfig = DEFAULT_PROCESSING,
) -> float:
    """Ratio of the two walk attenuation durations, with corrections.

    trace1 is the through-walk (full crossing), trace2 the orthogonal walk
    starting at the device.  Long through-windows are inflated slightly:
    they mean the walker likely hit an obstacle before completing the
    crossing, which truncates the measured duration.
    """
    try:
        w1 = extract_window_crossing(select_reference_trace(trace1, cfg), trace1.sample_rate_hz, cfg)
    except CsiError as exc:
        raise PathSignalError(1, str(exc)) from exc
    try:
        w2 = extract_window_halfpath(select_reference_trace(trace2, cfg), trace2.sample_rate_hz, cfg)
    except CsiError as exc:
        raise PathSignalError(2, str(exc)) from exc
    t1 = w1.duration_s
    if t1 > cfg.long_window_fraction * trace1.duration_s:
        t1 *= cfg.long_window_gain
    return t1 / w2.duration_s


def fluctuation_extent(trace: CsiTrace, cfg: ProcessingConfig = DEFAULT_PROCESSING) -> float:
    """Max/min amplitude ratio of the smoothed reference series.

    Guards at both ends drop the standing-still transients; the minimum is
    clamped to the 1st percentile if smoothing ever produces a zero.
    """
    ref = select_reference_trace(trace, cfg)
    guard = int(round(cfg.extent_guard_s * trace.sample_rate_hz))
    if ref.size > 2 * guard + 1:
        ref = ref[guard : ref.size - guard]
    peak = float(ref.max())
    floor = float(ref.min())
    if floor <= 0.0:
        floor = max(float(np.percentile(ref, 1)), 1e-12 * max(peak, 1.0))
    return peak / floor
