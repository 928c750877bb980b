"""Fast eye-diagram synthesis from channel S-parameters and a stored driver waveform.

The driver is stored as its response to a single isolated 1-bit, so the
far-end waveform of an arbitrary pattern is an exact superposition of
channel-filtered single-bit responses. The pattern is treated as periodic,
which makes the fold into a 2-UI eye exact modulo arithmetic and gives one
trace per pattern bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .sparams import TwoPort, cascade_diff
from .timedomain import band_limited_impulse

__all__ = [
    "DriverWaveform",
    "EyeDiagram",
    "EyeMetrics",
    "EyeCollapsedError",
    "prbs_bits",
    "trapezoid_driver",
    "load_driver",
    "save_driver",
    "impulse_response",
    "synthesize_eye",
    "extract_metrics",
    "simulate_link",
]

MIN_PATTERN_BITS = 127
MIN_POINTS_PER_INVERSE_UI = 8
SETTLE_TOL_V = 1e-3

_PRBS_TAPS = {7: (7, 6), 9: (9, 5), 11: (11, 9), 15: (15, 14)}


class EyeCollapsedError(ValueError):
    """The folded waveform never crosses the decision threshold."""


@dataclass(frozen=True)
class DriverWaveform:
    """Single-bit driver response sampled at ``dt_s``; starts and ends at the 0-level."""

    dt_s: float
    samples_v: np.ndarray
    bit_period_s: float

    def __post_init__(self):
        samples = np.asarray(self.samples_v, dtype=float)
        object.__setattr__(self, "samples_v", samples)
        ratio = self.bit_period_s / self.dt_s
        if abs(ratio - round(ratio)) > 1e-12 * ratio:
            raise ValueError(
                f"dt {self.dt_s:g} s does not divide the bit period {self.bit_period_s:g} s"
            )
        if samples.size < 2:
            raise ValueError("driver waveform needs at least 2 samples")
        if abs(samples[-1] - samples[-2]) > SETTLE_TOL_V or abs(samples[-1] - samples[0]) > SETTLE_TOL_V:
            raise ValueError("driver waveform has not settled back to the 0-level by its end")

    @property
    def samples_per_ui(self) -> int:
        return int(round(self.bit_period_s / self.dt_s))

    @property
    def swing_v(self) -> float:
        return float(np.max(self.samples_v) - np.min(self.samples_v))


@dataclass(frozen=True)
class EyeDiagram:
    """Pattern waveform folded into a 2-UI window, one trace per pattern bit."""

    ui_s: float
    samples_per_ui: int
    traces: np.ndarray

    @property
    def trace_count(self) -> int:
        return self.traces.shape[0]


@dataclass(frozen=True)
class EyeMetrics:
    eye_height_v: float
    eye_width_ui: float
    jitter_ui: float
    vertical_eye_noise_v: float


def prbs_bits(order: int = 7, seed: int = 0b1111111) -> np.ndarray:
    """Maximal-length LFSR bit sequence of length 2**order - 1 (0/1 ints)."""
    if order not in _PRBS_TAPS:
        raise ValueError(f"no tap table for PRBS order {order}")
    taps = _PRBS_TAPS[order]
    state = seed & ((1 << order) - 1)
    if state == 0:
        raise ValueError("LFSR seed must be nonzero")
    bits = np.empty((1 << order) - 1, dtype=int)
    for i in range(bits.size):
        bits[i] = state & 1
        fb = 0
        for t in taps:
            fb ^= state >> (t - 1)
        state = ((state << 1) | (fb & 1)) & ((1 << order) - 1)
    return bits


def trapezoid_driver(
    ui_s: float,
    samples_per_ui: int = 32,
    amplitude_v: float = 1.0,
    edge_s: float = 40e-12,
) -> DriverWaveform:
    """Synthetic trapezoid single-bit response (linear edges, flat top).

    Consecutive 1-bits superpose to a flat plateau because the falling edge
    of one bit and the rising edge of the next are complementary ramps.
    """
    dt = ui_s / samples_per_ui
    if edge_s >= ui_s:
        raise ValueError("edge time must be shorter than the bit period")
    n = int(np.ceil((ui_s + edge_s) / dt)) + 2
    t = np.arange(n) * dt
    up = np.clip(t / edge_s, 0.0, 1.0)
    down = np.clip((ui_s + edge_s - t) / edge_s, 0.0, 1.0)
    return DriverWaveform(dt_s=dt, samples_v=amplitude_v * np.minimum(up, down), bit_period_s=ui_s)


def save_driver(driver: DriverWaveform, path) -> None:
    """Write the driver file format: ``# ui=<seconds>`` then time_s,volts rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"# ui={driver.bit_period_s:.9g}\n")
        handle.write("time_s,volts\n")
        for i, v in enumerate(driver.samples_v):
            handle.write(f"{i * driver.dt_s:.9g},{v:.9g}\n")


def load_driver(path) -> DriverWaveform:
    ui = None
    times: list[float] = []
    volts: list[float] = []
    with open(path, "r", encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("ui="):
                    ui = float(body[3:])
                continue
            if line.lower().startswith("time"):
                continue
            t_tok, v_tok = line.split(",")
            times.append(float(t_tok))
            volts.append(float(v_tok))
    if ui is None:
        raise ValueError("driver file is missing the '# ui=<seconds>' header")
    if len(times) < 2:
        raise ValueError("driver file has fewer than 2 samples")
    dts = np.diff(times)
    dt = float(np.median(dts))
    if not np.allclose(dts, dt, rtol=1e-9, atol=dt * 1e-9):
        raise ValueError("driver samples are not uniformly spaced")
    return DriverWaveform(dt_s=dt, samples_v=np.asarray(volts), bit_period_s=ui)


def impulse_response(
    freqs_hz,
    sdd21,
    ui_s: float,
    dt_s: float,
    taper_fraction: float = 0.0,
    min_span_s: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Channel impulse response as FIR taps at the measurement's natural rate.

    Returns ``(h, dt_tap)`` where ``dt_tap`` is the largest integer multiple
    of the simulation step ``dt_s`` whose Nyquist still covers the measured
    band; at that spacing a flat (identity) spectrum inverts to an exact
    discrete delta. The waveform engine places one driver copy per tap, so
    the channel never has to be interpolated above its measured bandwidth.

    Errors when the grid is too sparse to resolve the bit period (fewer than
    8 points per 1/UI); warns when the band stops short of 2/UI, where the
    eye is band-limited by the measurement rather than the channel.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    df = float(np.median(np.diff(freqs)))
    points_per_inv_ui = (1.0 / ui_s) / df
    if points_per_inv_ui < MIN_POINTS_PER_INVERSE_UI:
        raise ValueError(
            f"grid spacing {df:g} Hz gives {points_per_inv_ui:.1f} points per 1/UI; "
            f"need at least {MIN_POINTS_PER_INVERSE_UI}"
        )
    if freqs[-1] < 2.0 / ui_s:
        warnings.warn(
            f"grid stops at {freqs[-1]:g} Hz, below 2/UI = {2.0 / ui_s:g} Hz; eye is band-limited",
            stacklevel=2,
        )
    m = max(1, int(1.0 / (2.0 * freqs[-1] * dt_s) + 1e-9))
    dt_tap = m * dt_s
    h = band_limited_impulse(
        freqs, sdd21, dt_s=dt_tap, min_span_s=min_span_s, taper_fraction=taper_fraction
    )
    return h, dt_tap


def _wrap_sum(x: np.ndarray, period: int) -> np.ndarray:
    """Fold a sequence into one period (circular superposition)."""
    out = np.zeros(period)
    for start in range(0, x.size, period):
        chunk = x[start : start + period]
        out[: chunk.size] += chunk
    return out


def single_bit_response(channel: TwoPort, driver: DriverWaveform, taper_fraction: float = 0.0) -> np.ndarray:
    """Far-end response to one isolated 1-bit, at the driver's sample rate.

    One driver copy is superposed per channel FIR tap (the taps sit on a
    coarser grid, so this is a sparse convolution after zero-stuffing).
    """
    h, dt_tap = impulse_response(
        channel.freqs_hz, channel.s21, ui_s=driver.bit_period_s, dt_s=driver.dt_s,
        taper_fraction=taper_fraction,
    )
    m = int(round(dt_tap / driver.dt_s))
    stuffed = np.zeros(h.size * m)
    stuffed[::m] = h
    return np.convolve(driver.samples_v, stuffed)


def synthesize_eye(
    channel: TwoPort, driver: DriverWaveform, pattern, taper_fraction: float = 0.0
) -> EyeDiagram:
    """Far-end eye of a periodic bit pattern through a differential channel.

    The waveform is the circular superposition of the channel-filtered
    single-bit response placed at each 1-bit, which equals the steady state
    of a long repeated-pattern convolution.
    """
    bits = np.asarray(pattern, dtype=int)
    if bits.size < MIN_PATTERN_BITS:
        raise ValueError(f"pattern must be at least {MIN_PATTERN_BITS} bits, got {bits.size}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("pattern must contain only 0 and 1 bits")

    ui = driver.bit_period_s
    spu = driver.samples_per_ui
    period = bits.size * spu

    sbr = single_bit_response(channel, driver, taper_fraction)

    train = np.zeros(period)
    train[np.nonzero(bits)[0] * spu] = 1.0
    wave = np.fft.irfft(np.fft.rfft(train) * np.fft.rfft(_wrap_sum(sbr, period)), n=period)

    idx = (np.arange(2 * spu)[None, :] + spu * np.arange(bits.size)[:, None]) % period
    return EyeDiagram(ui_s=ui, samples_per_ui=spu, traces=wave[idx])


def _crossing_phases(traces: np.ndarray, threshold: float, spu: int) -> np.ndarray:
    """Threshold-crossing times of every trace, as phases in UI modulo 1."""
    s = traces - threshold
    left, right = s[:, :-1], s[:, 1:]
    hit = (left * right < 0) | ((left == 0) & (right != 0))
    rows, cols = np.nonzero(hit)
    if rows.size == 0:
        return np.empty(0)
    frac = left[rows, cols] / (left[rows, cols] - right[rows, cols])
    return ((cols + frac) / spu) % 1.0


def extract_metrics(eye: EyeDiagram) -> EyeMetrics:
    """Reduce a folded eye to height, width, deterministic jitter, and noise.

    Jitter is the peak-to-peak spread of threshold-crossing times (the
    crossing cluster is the arc of the unit circle not covered by the
    largest empty gap), eye width is 1 - jitter, and the vertical metrics
    are taken at the column halfway between mean crossings.
    """
    traces = eye.traces
    spu = eye.samples_per_ui
    vmid = (traces.max() + traces.min()) / 2.0

    phases = _crossing_phases(traces, vmid, spu)
    if phases.size == 0:
        raise EyeCollapsedError("eye collapsed: no threshold crossings")
    order = np.sort(phases)
    gaps = np.diff(np.concatenate([order, [order[0] + 1.0]]))
    widest = int(np.argmax(gaps))
    max_gap = float(gaps[widest])
    jitter = min(max(1.0 - max_gap, 0.0), 1.0)
    width = max(max_gap, 0.0) if jitter > 0 else 1.0

    # Anchor at the gap end so the cluster mean is an ordinary average.
    anchor = order[(widest + 1) % order.size]
    mean_phase = (anchor + float(np.mean((phases - anchor) % 1.0))) % 1.0
    center_col = int(round((mean_phase + 0.5) * spu)) % traces.shape[1]

    column = traces[:, center_col]
    top = column[column > vmid]
    bottom = column[column <= vmid]
    if top.size == 0 or bottom.size == 0:
        raise EyeCollapsedError("eye collapsed: a rail is empty at the eye center")

    height = max(float(top.min() - bottom.max()), 0.0)
    noise = float((top.max() - top.min()) + (bottom.max() - bottom.min()))
    return EyeMetrics(
        eye_height_v=height,
        eye_width_ui=width,
        jitter_ui=jitter,
        vertical_eye_noise_v=noise,
    )


def simulate_link(pwb_sdd: TwoPort, fixed_components, driver: DriverWaveform, pattern) -> EyeMetrics:
    """Eye metrics of the board block cascaded with fixed link components.

    Fixed components are cascaded after the board block in list order; the
    stated invariants (split-in-half equivalence, pure-delay insensitivity)
    hold for any fixed convention.
    """
    channel = pwb_sdd
    for block in fixed_components:
        channel = cascade_diff(channel, block)
    return extract_metrics(synthesize_eye(channel, driver, pattern))
