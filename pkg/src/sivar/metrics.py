"""Scalar SI outcomes of one net: skew, loss per inch, mode conversion, return-loss crossing.

Flight times come from unwrapped transmission phase at a single sample
frequency (t = -phase_deg / (360 f)), and random skew is the P/N flight-time
difference minus the designed-in skew implied by the layout length mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sparams import MixedModeNetwork, NetworkData

__all__ = [
    "OutcomeRow",
    "GridError",
    "unwrap_phase",
    "flight_time",
    "total_skew",
    "random_skew",
    "loss_per_inch",
    "scd21_db",
    "sdd11_crossing",
    "snap_to_grid",
    "board_velocity",
    "SCD21_FLOOR_DB",
]

SCD21_FLOOR_DB = -200.0
METERS_PER_INCH = 0.0254


class GridError(ValueError):
    """A requested sample frequency does not sit on the measured grid."""


@dataclass
class OutcomeRow:
    """Per-net scalar outcomes; frequency-sampled values keyed by Hz."""

    net_id: str
    random_skew_ps: dict[float, float] = field(default_factory=dict)
    loss_db_per_in: dict[float, float] = field(default_factory=dict)
    scd21_db: dict[float, float] = field(default_factory=dict)
    f_sdd11_minus10db_hz: float | None = None
    impedance_odd_ohm: float | None = None
    impedance_window_start_s: float | None = None
    eye_height_v: float | None = None
    eye_width_ui: float | None = None
    eye_jitter_ui: float | None = None
    eye_noise_v: float | None = None


def snap_to_grid(freqs_hz: np.ndarray, f_sample_hz: float) -> int:
    """Index of the grid point nearest ``f_sample_hz``.

    The snap distance must be at most half the local grid step, so a sample
    frequency outside the measured band (or between coarse points) is an
    error rather than a silent approximation.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    idx = int(np.argmin(np.abs(freqs - f_sample_hz)))
    step = freqs[min(idx + 1, freqs.size - 1)] - freqs[max(idx - 1, 0)]
    step /= 2.0 if 0 < idx < freqs.size - 1 else 1.0
    if abs(freqs[idx] - f_sample_hz) > step / 2.0 + 1e-6 * step:
        raise GridError(
            f"sample frequency {f_sample_hz:g} Hz is {abs(freqs[idx] - f_sample_hz):g} Hz "
            f"from the nearest grid point (limit {step / 2.0:g})"
        )
    return idx


def unwrap_phase(series: np.ndarray) -> np.ndarray:
    """Continuous phase in degrees of a complex series over ascending frequency.

    Adjacent samples differ by less than 180 degrees after unwrapping and the
    first sample is anchored inside (-180, 180]. A zero-magnitude entry has no
    phase; it is reported by index.
    """
    series = np.asarray(series, dtype=complex)
    zero = np.nonzero(series == 0)[0]
    if zero.size:
        raise ValueError(f"zero magnitude at frequency index {zero[0]}; phase undefined")
    return np.rad2deg(np.unwrap(np.angle(series)))


def flight_time(s_through: np.ndarray, freqs_hz: np.ndarray, f_sample_hz: float) -> float:
    """Time of flight in seconds from a through path's phase at one frequency."""
    idx = snap_to_grid(freqs_hz, f_sample_hz)
    phase_deg = unwrap_phase(s_through)
    return -phase_deg[idx] / (360.0 * freqs_hz[idx])


def total_skew(net: NetworkData, f_sample_hz: float) -> float:
    """P minus N flight time (seconds), from S21 and S43."""
    t_p = flight_time(net.s[:, 1, 0], net.freqs_hz, f_sample_hz)
    t_n = flight_time(net.s[:, 3, 2], net.freqs_hz, f_sample_hz)
    return t_p - t_n


def random_skew(
    net: NetworkData,
    len_p_in: float,
    len_n_in: float,
    v_ref_m_per_s: float,
    f_sample_hz: float,
) -> float:
    """Random skew in picoseconds: total skew minus designed-in skew.

    Designed-in skew is the P-N length mismatch divided by the reference
    propagation velocity (the board's longest-net average velocity). The sign
    is preserved; negative means the N path is slower than designed.
    """
    if len_p_in is None or len_n_in is None:
        raise ValueError("metadata incomplete: P and N lengths required for random skew")
    if not v_ref_m_per_s > 0:
        raise ValueError("reference velocity must be positive")
    designed_s = (len_p_in - len_n_in) * METERS_PER_INCH / v_ref_m_per_s
    return (total_skew(net, f_sample_hz) - designed_s) * 1e12


def loss_per_inch(
    mm: MixedModeNetwork, len_p_in: float, len_n_in: float, f_sample_hz: float
) -> float:
    """Differential insertion loss in dB/inch (positive = loss).

    Normalized by the mean of the P and N lengths, which keeps the result
    invariant under a P/N port swap.
    """
    mean_len = (len_p_in + len_n_in) / 2.0
    if not mean_len > 0:
        raise ValueError("net length must be positive")
    idx = snap_to_grid(mm.freqs_hz, f_sample_hz)
    mag = abs(mm.sdd[idx, 1, 0])
    if mag == 0:
        raise ValueError(f"no through path: |SDD21| = 0 at {f_sample_hz:g} Hz")
    return -20.0 * np.log10(mag) / mean_len


def scd21_db(mm: MixedModeNetwork, f_sample_hz: float) -> float:
    """Differential-to-common conversion 20*log10|SCD21| in dB, floored at -200."""
    idx = snap_to_grid(mm.freqs_hz, f_sample_hz)
    mag = abs(mm.scd[idx, 1, 0])
    if mag == 0:
        return SCD21_FLOOR_DB
    return max(20.0 * float(np.log10(mag)), SCD21_FLOOR_DB)


def sdd11_crossing(mm: MixedModeNetwork, threshold_db: float = -10.0) -> float | None:
    """Lowest frequency where 20*log10|SDD11| first rises above the threshold.

    Linearly interpolated in dB between grid points; the first grid frequency
    if already above at the band start; ``None`` if never crossed.
    """
    mag = np.abs(mm.sdd[:, 0, 0])
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag)
    db = np.maximum(db, SCD21_FLOOR_DB)
    above = db > threshold_db
    if not above.any():
        return None
    idx = int(np.argmax(above))
    if idx == 0:
        return float(mm.freqs_hz[0])
    f0, f1 = mm.freqs_hz[idx - 1], mm.freqs_hz[idx]
    d0, d1 = db[idx - 1], db[idx]
    return float(f0 + (threshold_db - d0) / (d1 - d0) * (f1 - f0))


def board_velocity(
    nets: list[tuple[NetworkData, float, float]], f_ref_hz: float = 1e9
) -> float:
    """Average propagation velocity (m/s) of a board's longest net.

    ``nets`` is a list of (network, len_p_in, len_n_in). The longest net is
    the one with the largest mean length; its velocity is mean length over
    mean P/N flight time at ``f_ref_hz``. Used once per board as the v_ref
    for designed-in skew subtraction.
    """
    if not nets:
        raise ValueError("no nets to derive a board velocity from")
    net, len_p, len_n = max(nets, key=lambda item: (item[1] + item[2]) / 2.0)
    mean_len_m = (len_p + len_n) / 2.0 * METERS_PER_INCH
    t_p = flight_time(net.s[:, 1, 0], net.freqs_hz, f_ref_hz)
    t_n = flight_time(net.s[:, 3, 2], net.freqs_hz, f_ref_hz)
    mean_t = (t_p + t_n) / 2.0
    if not mean_t > 0:
        raise ValueError("longest net has non-positive flight time; cannot derive velocity")
    return mean_len_m / mean_t
