"""Time-domain step response of SDD11 and windowed odd-mode impedance.

The reflection step rho(t) comes from the inverse transform of the
differential return loss; impedance is the pointwise bilinear map
z = z_ref (1 + rho) / (1 - rho), and the reported value is a 2 ns window
average taken after the first via's capacitive transient settles, divided
by two for the odd mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .timedomain import band_limited_impulse

__all__ = ["TdrTrace", "step_response", "find_settle_time", "windowed_impedance", "trace_to_csv"]

DC_START_WARN_HZ = 50e6


@dataclass(frozen=True)
class TdrTrace:
    """Reflection step and impedance profile on a uniform time grid."""

    time_s: np.ndarray
    rho: np.ndarray
    z_ohm: np.ndarray
    z_ref_diff_ohm: float

    @property
    def dt_s(self) -> float:
        return float(self.time_s[1] - self.time_s[0])


PRE_TRIGGER_S = 1e-9


def step_response(
    freqs_hz,
    sdd11,
    z_ref_diff_ohm: float = 100.0,
    dt_s: float = 5e-12,
    min_span_s: float = 10e-9,
    taper_fraction: float = 0.1,
) -> TdrTrace:
    """Convert SDD11 to a real causal reflection step and impedance trace.

    The response is synthesized with a 1 ns pre-trigger delay and the trace
    re-anchored at the first reflection, so the band-limited kernel of the
    t=0 event is captured whole instead of wrapping to the window end.
    Emits a warning when the grid starts above 50 MHz, where the DC
    extrapolation becomes a guess rather than a short reach.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    if freqs[0] > DC_START_WARN_HZ:
        warnings.warn(
            f"grid starts at {freqs[0]:g} Hz (> {DC_START_WARN_HZ:g}); "
            "DC extrapolation quality degrades",
            stacklevel=2,
        )
    impulse = band_limited_impulse(
        freqs,
        sdd11,
        dt_s=dt_s,
        min_span_s=min_span_s + PRE_TRIGGER_S,
        taper_fraction=taper_fraction,
        pre_delay_s=PRE_TRIGGER_S,
    )
    skip = int(round(PRE_TRIGGER_S / dt_s))
    rho = np.cumsum(impulse)[skip:]
    time = np.arange(rho.size) * dt_s
    with np.errstate(divide="ignore", invalid="ignore"):
        z = z_ref_diff_ohm * (1.0 + rho) / (1.0 - rho)
    return TdrTrace(time_s=time, rho=rho, z_ohm=z, z_ref_diff_ohm=z_ref_diff_ohm)


def find_settle_time(
    trace: TdrTrace,
    slope_limit_ohm_per_s: float = 5e9,
    hold_s: float = 100e-12,
) -> float:
    """Earliest time where |dZ/dt| stays below the limit for ``hold_s``.

    This is the automated "first via settled" detector; 5 ohm/ns held for
    100 ps by default. Falls back to the start of the trace when the whole
    trace is quiet, and raises if the slope never calms down.
    """
    dz = np.gradient(trace.z_ohm, trace.dt_s)
    quiet = np.abs(dz) < slope_limit_ohm_per_s
    hold_n = max(int(round(hold_s / trace.dt_s)), 1)
    if hold_n > quiet.size:
        raise ValueError("trace shorter than the settle hold window")
    runs = np.convolve(quiet.astype(int), np.ones(hold_n, dtype=int), mode="valid")
    idx = np.nonzero(runs == hold_n)[0]
    if idx.size == 0:
        raise ValueError("impedance slope never settles below the limit")
    return float(trace.time_s[idx[0]])


def windowed_impedance(
    trace: TdrTrace,
    t_start_s: float | None = None,
    window_s: float = 2e-9,
) -> float:
    """Odd-mode impedance: mean differential Z over the window, divided by 2.

    ``t_start_s=None`` uses :func:`find_settle_time`. The window must fit
    inside the trace span.
    """
    if t_start_s is None:
        t_start_s = find_settle_time(trace)
    t_stop = t_start_s + window_s
    if t_start_s < trace.time_s[0] or t_stop > trace.time_s[-1]:
        raise ValueError(
            f"window [{t_start_s:g}, {t_stop:g}] s exceeds trace span "
            f"[{trace.time_s[0]:g}, {trace.time_s[-1]:g}] s"
        )
    sel = (trace.time_s >= t_start_s) & (trace.time_s <= t_stop)
    return float(np.mean(trace.z_ohm[sel])) / 2.0


def trace_to_csv(trace: TdrTrace, path) -> None:
    """Export (time_s, rho, z_ohm) rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("time_s,rho,z_ohm\n")
        for t, r, z in zip(trace.time_s, trace.rho, trace.z_ohm):
            handle.write(f"{t:.9g},{r:.9g},{z:.9g}\n")
