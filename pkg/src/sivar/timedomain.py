"""Band-limited frequency data to causal real time responses.

Shared machinery for the TDR and link-simulation paths: DC extrapolation,
conjugate-symmetric extension, raised-cosine band-edge taper, inverse FFT.
"""

from __future__ import annotations

import warnings

import numpy as np

__all__ = ["band_limited_impulse"]


def _dc_extrapolate(freqs: np.ndarray, values: np.ndarray) -> complex:
    """DC value: real part extrapolated to f=0, imaginary part zero.

    The real part of a real-impulse-response spectrum is an even function of
    frequency (zero slope at DC), so the fit is linear in f^2 through the
    first two points rather than linear in f, which would manufacture a
    spurious DC offset from the curvature.
    """
    re0, re1 = values[0].real, values[1].real
    f0sq, f1sq = freqs[0] ** 2, freqs[1] ** 2
    return complex(re0 - f0sq * (re1 - re0) / (f1sq - f0sq), 0.0)


def band_limited_impulse(
    freqs_hz,
    values,
    dt_s: float,
    min_span_s: float = 0.0,
    taper_fraction: float = 0.1,
    pre_delay_s: float = 0.0,
):
    """Impulse response samples from positive-frequency data.

    The returned array ``h`` has time step exactly ``dt_s`` and length
    ``n = span / dt_s`` with span at least ``max(min_span_s, 1/df)`` for the
    measured grid spacing ``df``; ``sum(h)`` equals the extrapolated DC value,
    so a cumulative sum gives the unit step response.

    Bins below the measured band start use linear DC extrapolation in the
    real part and proportional-to-f decay in the imaginary part. The top
    ``taper_fraction`` of the measured band gets a raised-cosine taper down
    to zero at the band edge. A non-uniform input grid is accepted (values
    are linearly interpolated onto FFT bins) with a warning.

    ``pre_delay_s`` shifts the whole response later in time (applied as a
    linear phase after extrapolation). A t=0 event in the data has half of
    its band-limited kernel at negative time, which would otherwise wrap to
    the window end; shifting moves the full kernel inside the window.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    values = np.asarray(values, dtype=complex)
    if freqs.ndim != 1 or freqs.size < 2:
        raise ValueError("need at least 2 frequency points")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("frequencies must be strictly increasing")
    if values.shape != freqs.shape:
        raise ValueError("frequency and value arrays differ in length")
    if dt_s <= 0:
        raise ValueError("time step must be positive")

    steps = np.diff(freqs)
    df_grid = float(np.median(steps))
    if not np.allclose(steps, df_grid, rtol=1e-6, atol=df_grid * 1e-6):
        warnings.warn("non-uniform frequency grid; resampling by linear interpolation", stacklevel=2)

    f_max = freqs[-1]
    if f_max * 2.0 * dt_s > 1.0 + 1e-12:
        # Nyquist of the requested time grid sits below the measured band top.
        raise ValueError(
            f"time step {dt_s:g} s cannot represent content up to {f_max:g} Hz"
        )

    span = max(float(min_span_s), 1.0 / df_grid)
    n_half = max(int(np.ceil(span / (2.0 * dt_s))), 2)
    n_fft = 2 * n_half
    df = 1.0 / (n_fft * dt_s)

    bins = np.arange(n_half + 1) * df
    spectrum = np.zeros(n_half + 1, dtype=complex)

    in_band = (bins >= freqs[0]) & (bins <= f_max)
    spectrum[in_band] = np.interp(bins[in_band], freqs, values.real) + 1j * np.interp(
        bins[in_band], freqs, values.imag
    )

    dc = _dc_extrapolate(freqs, values)
    below = (bins > 0) & (bins < freqs[0])
    if below.any():
        frac = bins[below] / freqs[0]
        spectrum[below] = dc.real + frac * (values[0].real - dc.real) + 1j * frac * values[0].imag
    spectrum[0] = dc

    if taper_fraction > 0:
        edge = f_max * (1.0 - taper_fraction)
        ramp = (bins > edge) & (bins <= f_max)
        spectrum[ramp] *= 0.5 * (1.0 + np.cos(np.pi * (bins[ramp] - edge) / (f_max - edge)))
    spectrum[bins > f_max] = 0.0

    if pre_delay_s:
        spectrum *= np.exp(-2j * np.pi * bins * pre_delay_s)

    # irfft enforces the conjugate-symmetric negative half.
    return np.fft.irfft(spectrum, n=n_fft)
