"""4-port Touchstone I/O, mixed-mode conversion, and differential cascading.

Port convention throughout: port 1 = P near end, port 2 = P far end,
port 3 = N near end, port 4 = N far end, so S21 and S43 are the P and N
through paths. Differential port A pairs single-ended ports (1, 3) and
differential port B pairs (2, 4).
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NetworkData",
    "MixedModeNetwork",
    "TwoPort",
    "TouchstoneError",
    "CascadeError",
    "DEFAULT_PORT_MAP",
    "parse_touchstone",
    "read_touchstone",
    "write_touchstone",
    "apply_port_map",
    "to_mixed_mode",
    "cascade_diff",
    "ideal_delay_twoport",
    "ideal_through",
]

_UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_FORMATS = ("RI", "MA", "DB")

DEFAULT_PORT_MAP = (1, 2, 3, 4)


class TouchstoneError(ValueError):
    """Malformed Touchstone content; message carries the offending line number."""


class CascadeError(ValueError):
    """Cascade impossible (grid mismatch or singular through path)."""


@dataclass(frozen=True)
class NetworkData:
    """4-port S-parameters on an ascending frequency grid.

    ``s[k]`` is the 4x4 complex matrix at ``freqs_hz[k]`` with ``s[k][i][j]``
    holding S(i+1)(j+1). A single-frequency network is representable (files
    with one point parse fine) but most downstream operations need a grid of
    at least 2 points and validate that themselves.

    ``port_map[i]`` names the file port playing canonical role ``i + 1``; the
    default (1, 2, 3, 4) means the file already follows the P-near, P-far,
    N-near, N-far convention.
    """

    freqs_hz: np.ndarray
    s: np.ndarray
    z_ref_ohm: float = 50.0
    port_map: tuple[int, int, int, int] = DEFAULT_PORT_MAP

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "s", s)
        if freqs.ndim != 1 or freqs.size < 1:
            raise ValueError("need at least 1 frequency point")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if s.shape != (freqs.size, 4, 4):
            raise ValueError(f"S array shape {s.shape} does not match {freqs.size} frequencies")
        if not self.z_ref_ohm > 0:
            raise ValueError("reference impedance must be positive")

    @property
    def nfreqs(self) -> int:
        return self.freqs_hz.size


@dataclass(frozen=True)
class MixedModeNetwork:
    """Differential/common-mode blocks of a 4-port network, on the source grid."""

    freqs_hz: np.ndarray
    sdd: np.ndarray
    sdc: np.ndarray
    scd: np.ndarray
    scc: np.ndarray
    z_ref_diff_ohm: float = 100.0
    z_ref_comm_ohm: float = 25.0

    def sdd_twoport(self) -> "TwoPort":
        """The differential-differential block as a standalone 2-port."""
        return TwoPort(self.freqs_hz, self.sdd, self.z_ref_diff_ohm)


@dataclass(frozen=True)
class TwoPort:
    """2-port S-parameters (used for differential-mode link blocks)."""

    freqs_hz: np.ndarray
    s: np.ndarray
    z_ref_ohm: float = 100.0

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=float)
        s = np.asarray(self.s, dtype=complex)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "s", s)
        if s.shape != (freqs.size, 2, 2):
            raise ValueError(f"S array shape {s.shape} does not match {freqs.size} frequencies")

    @property
    def s11(self) -> np.ndarray:
        return self.s[:, 0, 0]

    @property
    def s21(self) -> np.ndarray:
        return self.s[:, 1, 0]


def _parse_option_line(parts: list[str], lineno: int) -> tuple[float, str, float]:
    """Decode ``# <unit> S <RI|MA|DB> R <z>`` with Touchstone defaults."""
    scale, fmt, z_ref = _UNIT_SCALE["ghz"], "MA", 50.0
    i = 0
    while i < len(parts):
        tok = parts[i].lower()
        if tok in _UNIT_SCALE:
            scale = _UNIT_SCALE[tok]
        elif tok == "s":
            pass
        elif tok in ("y", "z", "g", "h"):
            raise TouchstoneError(f"line {lineno}: unsupported parameter type '{parts[i]}' (S only)")
        elif tok in ("ri", "ma", "db"):
            fmt = tok.upper()
        elif tok == "r":
            if i + 1 >= len(parts):
                raise TouchstoneError(f"line {lineno}: option line 'R' without impedance value")
            try:
                z_ref = float(parts[i + 1])
            except ValueError as exc:
                raise TouchstoneError(f"line {lineno}: bad reference impedance '{parts[i + 1]}'") from exc
            i += 1
        else:
            raise TouchstoneError(f"line {lineno}: malformed option line token '{parts[i]}'")
        i += 1
    if z_ref <= 0:
        raise TouchstoneError(f"line {lineno}: reference impedance must be positive")
    return scale, fmt, z_ref


def _pairs_to_complex(fmt: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        return a * np.exp(1j * np.deg2rad(b))
    # DB: 20*log10 magnitude, angle in degrees
    return 10.0 ** (a / 20.0) * np.exp(1j * np.deg2rad(b))


def parse_touchstone(text, expect_z_ref: float | None = None) -> NetworkData:
    """Parse Touchstone v1 4-port content into a :class:`NetworkData`.

    ``text`` may be a string or any iterable of lines. Matrix rows are in
    port order; wrapped continuation lines are joined. Frequencies are
    converted to Hz and RI/MA/DB values normalized to complex rectangular.

    Raises :class:`TouchstoneError` with a line number for a malformed
    option line, non-monotone frequencies, a truncated matrix block, or a
    token count inconsistent with 4 ports. A file reference impedance that
    disagrees with ``expect_z_ref`` is a warning, not an error.
    """
    if isinstance(text, str):
        lines = text.splitlines()
    else:
        lines = [str(line).rstrip("\n") for line in text]

    option: tuple[float, str, float] | None = None
    values: list[float] = []
    value_lines: list[int] = []

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneError(
                f"line {lineno}: Touchstone v2 keyword '{line.split()[0]}' not supported (v1 only)"
            )
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneError(f"line {lineno}: duplicate option line")
            option = _parse_option_line(line[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneError(f"line {lineno}: data before option line")
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError as exc:
                raise TouchstoneError(f"line {lineno}: non-numeric token '{tok}'") from exc
            value_lines.append(lineno)

    if option is None:
        raise TouchstoneError("line 0: missing option line")
    if not values:
        raise TouchstoneError("line 0: no data")
    scale, fmt, z_ref = option

    # One frequency block = frequency + 16 complex pairs = 33 numbers.
    if len(values) % 33 != 0:
        raise TouchstoneError(
            f"line {value_lines[-1]}: truncated matrix block "
            f"({len(values) % 33} trailing values; 4-port blocks need 33)"
        )
    raw = np.asarray(values, dtype=float).reshape(-1, 33)
    freqs = raw[:, 0] * scale
    for k in range(1, freqs.size):
        if freqs[k] <= freqs[k - 1]:
            lineno = value_lines[33 * k]
            raise TouchstoneError(
                f"line {lineno}: non-monotone frequency {raw[k, 0]!r} after {raw[k - 1, 0]!r}"
            )

    pairs = raw[:, 1:].reshape(-1, 16, 2)
    s = _pairs_to_complex(fmt, pairs[:, :, 0], pairs[:, :, 1]).reshape(-1, 4, 4)

    if expect_z_ref is not None and not math.isclose(z_ref, expect_z_ref, rel_tol=1e-9):
        warnings.warn(
            f"file reference impedance {z_ref} ohm differs from expected {expect_z_ref} ohm",
            stacklevel=2,
        )
    return NetworkData(freqs_hz=freqs, s=s, z_ref_ohm=z_ref)


def read_touchstone(path, expect_z_ref: float | None = None) -> NetworkData:
    """Parse a ``.s4p`` file from disk."""
    with open(path, "r", encoding="utf-8") as handle:
        return parse_touchstone(handle.read(), expect_z_ref=expect_z_ref)


@functools.lru_cache(maxsize=8)
def _body_template(nfreqs: int, precision: int) -> str:
    cell = f"%.{precision}e"
    row = " ".join([cell] * 8)
    indent = " " * (precision + 8)
    block = cell + " " + row + "\n" + "".join(indent + row + "\n" for _ in range(3))
    return block * nfreqs


def write_touchstone(net: NetworkData, fmt: str = "RI", precision: int = 9) -> str:
    """Serialize to Touchstone v1 text (Hz grid, one matrix row per line).

    ``precision`` is significant digits; the default 9 keeps a parse/write
    roundtrip of passive data within 1e-9 per entry.
    """
    fmt = fmt.upper()
    if fmt not in _FORMATS:
        raise ValueError(f"unsupported format {fmt!r} (RI, MA, or DB)")
    if fmt == "RI":
        a, b = net.s.real, net.s.imag
    else:
        mag = np.abs(net.s)
        ang = np.rad2deg(np.angle(net.s))
        if fmt == "MA":
            a, b = mag, ang
        else:
            with np.errstate(divide="ignore"):
                a = 20.0 * np.log10(mag)
            a = np.maximum(a, -999.0)
            b = ang
    # Interleave (a, b) pairs row-wise and format the whole body with one
    # %-template; population-scale emission is formatting-bound and this is
    # several times faster than per-number format calls.
    pairs = np.empty((net.nfreqs, 4, 8))
    pairs[:, :, 0::2] = a
    pairs[:, :, 1::2] = b
    body = np.concatenate([net.freqs_hz[:, None], pairs.reshape(net.nfreqs, 32)], axis=1)
    template = _body_template(net.nfreqs, precision)
    header = f"# Hz S {fmt} R {net.z_ref_ohm:g}\n"
    return header + template % tuple(body.ravel().tolist())


def save_touchstone(net: NetworkData, path, fmt: str = "RI", precision: int = 9) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(write_touchstone(net, fmt=fmt, precision=precision))


# Rows map single-ended waves (a1..a4) onto (d1, d2, c1, c2) for the pairing
# d1=(1,3), d2=(2,4); orthonormal, so the inverse is the transpose.
_MM = np.array(
    [
        [1.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
    ]
) / math.sqrt(2.0)


def apply_port_map(net: NetworkData) -> NetworkData:
    """Reorder the S-matrix into the canonical port convention.

    Returns the input unchanged when the map is already canonical; otherwise
    the data is materialized in P-near/P-far/N-near/N-far order so raw-index
    consumers (S21, S43 through paths) and the mixed-mode transform agree.
    """
    if net.port_map == DEFAULT_PORT_MAP:
        return net
    order = [p - 1 for p in net.port_map]
    return NetworkData(
        freqs_hz=net.freqs_hz,
        s=net.s[:, order][:, :, order],
        z_ref_ohm=net.z_ref_ohm,
    )


def to_mixed_mode(net: NetworkData) -> MixedModeNetwork:
    """Convert single-ended 4-port data to mixed-mode 2x2 blocks.

    Uses the standard similarity transform S_mm = M S M^T, which yields
    SDD21 = (S21 - S23 - S41 + S43)/2, SCD21 = (S21 - S23 + S41 - S43)/2,
    and the corresponding expressions for the remaining entries.
    """
    s = apply_port_map(net).s
    smm = np.einsum("ij,kjl,ml->kim", _MM, s, _MM)
    return MixedModeNetwork(
        freqs_hz=net.freqs_hz,
        sdd=smm[:, :2, :2],
        sdc=smm[:, :2, 2:],
        scd=smm[:, 2:, :2],
        scc=smm[:, 2:, 2:],
        z_ref_diff_ohm=2.0 * net.z_ref_ohm,
        z_ref_comm_ohm=net.z_ref_ohm / 2.0,
    )


def cascade_diff(a: TwoPort, b: TwoPort) -> TwoPort:
    """Series-connect two 2-port blocks via transfer-parameter conversion.

    Requires identical frequency grids and reference impedances. Raises
    :class:`CascadeError` at the first frequency index where a block's S21
    vanishes (the T-parameter conversion is singular there).
    """
    if a.freqs_hz.shape != b.freqs_hz.shape or not np.allclose(
        a.freqs_hz, b.freqs_hz, rtol=1e-12, atol=0.0
    ):
        raise CascadeError("frequency grids differ")
    if not math.isclose(a.z_ref_ohm, b.z_ref_ohm, rel_tol=1e-12):
        raise CascadeError("reference impedances differ")

    def to_t(s: np.ndarray, name: str) -> np.ndarray:
        s21 = s[:, 1, 0]
        bad = np.nonzero(s21 == 0)[0]
        if bad.size:
            raise CascadeError(f"{name}: S21 is zero at frequency index {bad[0]}")
        t = np.empty_like(s)
        det = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
        t[:, 0, 0] = -det / s21
        t[:, 0, 1] = s[:, 0, 0] / s21
        t[:, 1, 0] = -s[:, 1, 1] / s21
        t[:, 1, 1] = 1.0 / s21
        return t

    t = to_t(a.s, "first block") @ to_t(b.s, "second block")
    t22 = t[:, 1, 1]
    bad = np.nonzero(t22 == 0)[0]
    if bad.size:
        raise CascadeError(f"cascade singular at frequency index {bad[0]}")
    s = np.empty_like(t)
    s[:, 0, 0] = t[:, 0, 1] / t22
    s[:, 0, 1] = (t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]) / t22
    s[:, 1, 0] = 1.0 / t22
    s[:, 1, 1] = -t[:, 1, 0] / t22
    return TwoPort(a.freqs_hz, s, a.z_ref_ohm)


def ideal_delay_twoport(freqs_hz, tau_s: float, z_ref_ohm: float = 100.0) -> TwoPort:
    """Matched pure-delay block: S21 = S12 = exp(-j*2*pi*f*tau)."""
    freqs = np.asarray(freqs_hz, dtype=float)
    s = np.zeros((freqs.size, 2, 2), dtype=complex)
    phase = np.exp(-2j * np.pi * freqs * tau_s)
    s[:, 1, 0] = phase
    s[:, 0, 1] = phase
    return TwoPort(freqs, s, z_ref_ohm)


def ideal_through(freqs_hz, z_ref_ohm: float = 100.0) -> TwoPort:
    """The cascade identity element (S21 = S12 = 1, S11 = S22 = 0)."""
    return ideal_delay_twoport(freqs_hz, 0.0, z_ref_ohm)
