"""Synthetic board populations with a known hierarchical ground truth.

Each net is a pair of uncoupled single-ended lines (shared loss profile,
individual delays, shunt-capacitor via discontinuities at both ends) whose
parameters are nominal values plus board-level, core-level, and per-net
Gaussian offsets. The ground truth records every injected value so the
analysis pipeline can be verified in closed loop.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataset import MANIFEST_COLUMNS, NetRecord
from .sparams import NetworkData, save_touchstone

__all__ = [
    "PopulationSpec",
    "NetParams",
    "GroundTruth",
    "Population",
    "net_model",
    "generate_population",
    "write_population",
    "default_grid",
]

C_M_PER_S = 299792458.0
DB_PER_NEPER = 20.0 / math.log(10.0)
METERS_PER_INCH = 0.0254


@dataclass(frozen=True)
class PopulationSpec:
    """Knobs of the synthetic population; all sigmas are standard deviations.

    Loss effects are expressed in dB/inch at 4 GHz and applied as a
    band-proportional scale on the nominal skin + dielectric profile. Skew
    effects are picoseconds of P-N delay imbalance, injected independently
    of length by default (``skew_per_inch_ps`` generates the contrary
    hypothesis for power studies).
    """

    boards: int = 6
    nets_per_board: int = 2000
    cores: int = 8
    length_range_in: tuple[float, float] = (1.7, 32.8)
    z_odd_nom_ohm: float = 52.4
    loss_skin_db_in: float = 0.09 / math.sqrt(1e9)  # dB/in per sqrt(Hz)
    loss_diel_db_in: float = 0.06 / 1e9  # dB/in per Hz
    via_pf: float = 0.15
    eps_r: float = 3.4
    sigma_z_board_ohm: float = 0.5
    sigma_z_core_ohm: float = 0.6
    sigma_z_net_ohm: float = 0.9
    sigma_loss_board_db_in: float = 0.04
    sigma_loss_core_db_in: float = 0.03
    sigma_loss_net_db_in: float = 0.06
    sigma_skew_board_ps: float = 4.0
    sigma_skew_core_ps: float = 4.0
    sigma_skew_net_ps: float = 18.0
    designed_skew_range_ps: tuple[float, float] = (0.0, 8.0)
    skew_per_inch_ps: float = 0.0
    f_start_hz: float = 10e6
    f_stop_hz: float = 6e9
    f_step_hz: float = 10e6
    z_ref_ohm: float = 50.0
    tester_id: str = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.boards < 1 or self.nets_per_board < 1 or self.cores < 1:
            raise ValueError("counts must be at least 1")
        lo, hi = self.length_range_in
        if not (0 < lo <= hi):
            raise ValueError("length range must be positive and ordered")
        for name in (
            "sigma_z_board_ohm", "sigma_z_core_ohm", "sigma_z_net_ohm",
            "sigma_loss_board_db_in", "sigma_loss_core_db_in", "sigma_loss_net_db_in",
            "sigma_skew_board_ps", "sigma_skew_core_ps", "sigma_skew_net_ps",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def velocity_m_per_s(self) -> float:
        return C_M_PER_S / math.sqrt(self.eps_r)

    @property
    def delay_per_inch_s(self) -> float:
        return METERS_PER_INCH / self.velocity_m_per_s

    @property
    def alpha_4ghz_db_in(self) -> float:
        return self.loss_skin_db_in * math.sqrt(4e9) + self.loss_diel_db_in * 4e9

    def board_serials(self) -> list[str]:
        return [f"B{b + 1:02d}" for b in range(self.boards)]

    @classmethod
    def from_json(cls, path) -> "PopulationSpec":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        known = {f.name for f in fields(cls)}
        for key in raw:
            if key not in known:
                raise ValueError(f"invalid spec field {key!r}")
        for key in ("length_range_in", "designed_skew_range_ps"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


@dataclass(frozen=True)
class NetParams:
    """Ground-truth parameters of one measured net instance."""

    z_odd_ohm: float
    tau_p_s: float
    tau_n_s: float
    len_p_in: float
    len_n_in: float
    alpha_scale: float
    designed_skew_ps: float
    random_skew_ps: float


@dataclass
class GroundTruth:
    """Everything the generator injected, keyed for closed-loop checks."""

    spec: PopulationSpec
    board_offsets: dict[str, dict[str, float]]
    core_offsets: dict[int, dict[str, float]]
    layout: dict[str, dict[str, float]]
    nets: dict[str, NetParams] = field(default_factory=dict)

    @staticmethod
    def key(board_serial: str, net_name: str) -> str:
        return f"{board_serial}/{net_name}"

    def to_json(self, path) -> None:
        payload = {
            "spec": asdict(self.spec),
            "board_offsets": self.board_offsets,
            "core_offsets": {str(k): v for k, v in self.core_offsets.items()},
            "layout": self.layout,
            "nets": {k: asdict(v) for k, v in self.nets.items()},
        }
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(payload, handle, indent=1, sort_keys=True)
            handle.write("\n")

    @classmethod
    def from_json(cls, path) -> "GroundTruth":
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        spec_raw = payload["spec"]
        for key in ("length_range_in", "designed_skew_range_ps"):
            spec_raw[key] = tuple(spec_raw[key])
        return cls(
            spec=PopulationSpec(**spec_raw),
            board_offsets=payload["board_offsets"],
            core_offsets={int(k): v for k, v in payload["core_offsets"].items()},
            layout=payload["layout"],
            nets={k: NetParams(**v) for k, v in payload["nets"].items()},
        )


def default_grid(spec: PopulationSpec) -> np.ndarray:
    n = int(round((spec.f_stop_hz - spec.f_start_hz) / spec.f_step_hz)) + 1
    return spec.f_start_hz + spec.f_step_hz * np.arange(n)


def _line_abcd(freqs: np.ndarray, z_c: float, tau_s: float, alpha_np: np.ndarray):
    """ABCD of a lossy line: linear phase from the delay, attenuation in nepers."""
    gamma_l = alpha_np + 2j * np.pi * freqs * tau_s
    cosh = np.cosh(gamma_l)
    sinh = np.sinh(gamma_l)
    return cosh, z_c * sinh, sinh / z_c, cosh


def _via_shunt_abcd(freqs: np.ndarray, c_farad: float):
    y = 2j * np.pi * freqs * c_farad
    one = np.ones_like(y)
    zero = np.zeros_like(y)
    return one, zero, y, one


def _abcd_chain(*blocks):
    a, b, c, d = blocks[0]
    for a2, b2, c2, d2 in blocks[1:]:
        a, b, c, d = a * a2 + b * c2, a * b2 + b * d2, c * a2 + d * c2, c * b2 + d * d2
    return a, b, c, d


def _abcd_to_s(a, b, c, d, z0: float):
    delta = a + b / z0 + c * z0 + d
    s = np.empty(a.shape + (2, 2), dtype=complex)
    s[..., 0, 0] = (a + b / z0 - c * z0 - d) / delta
    s[..., 0, 1] = 2.0 * (a * d - b * c) / delta
    s[..., 1, 0] = 2.0 / delta
    s[..., 1, 1] = (-a + b / z0 - c * z0 + d) / delta
    return s


def net_model(params: NetParams, grid, spec: PopulationSpec | None = None) -> NetworkData:
    """4-port S-parameters of one net: via-line-via per conductor, uncoupled.

    The shunt-capacitor vias at both ends reproduce the reflective
    interference ripple of real through-via stackups; the line itself has
    linear phase from its delay and a skin + dielectric attenuation profile.
    """
    spec = spec or PopulationSpec()
    freqs = np.asarray(grid, dtype=float)
    alpha_db_per_in = (
        spec.loss_skin_db_in * np.sqrt(freqs) + spec.loss_diel_db_in * freqs
    ) * params.alpha_scale
    c_via = spec.via_pf * 1e-12
    s4 = np.zeros((freqs.size, 4, 4), dtype=complex)
    for ports, tau, length in (
        ((0, 1), params.tau_p_s, params.len_p_in),
        ((2, 3), params.tau_n_s, params.len_n_in),
    ):
        alpha_np = alpha_db_per_in * length / DB_PER_NEPER
        line = _line_abcd(freqs, params.z_odd_ohm, tau, alpha_np)
        via = _via_shunt_abcd(freqs, c_via)
        s2 = _abcd_to_s(*_abcd_chain(via, line, via), z0=spec.z_ref_ohm)
        idx = np.asarray(ports)
        s4[:, idx[:, None], idx[None, :]] = s2
    return NetworkData(freqs_hz=freqs, s=s4, z_ref_ohm=spec.z_ref_ohm)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=key)))


_LAYOUT_STREAM, _BOARD_STREAM, _CORE_STREAM, _NET_STREAM = range(4)


class Population:
    """Generated records plus on-demand network synthesis.

    Networks are regenerated from the ground truth when requested instead of
    being held in memory; a 6-board default population would otherwise be
    gigabytes of complex matrices.
    """

    def __init__(self, spec: PopulationSpec, records: list[NetRecord], truth: GroundTruth):
        self.spec = spec
        self.records = records
        self.truth = truth
        self._grid = default_grid(spec)

    @property
    def grid(self) -> np.ndarray:
        return self._grid

    def network_for(self, record: NetRecord) -> NetworkData:
        params = self.truth.nets[GroundTruth.key(record.board_serial, record.net_name)]
        return net_model(params, self._grid, self.spec)

    def networks(self):
        for record in self.records:
            yield record, self.network_for(record)


def generate_population(spec: PopulationSpec) -> Population:
    """Draw the layout and all hierarchical offsets; nets synthesize lazily.

    Identical spec and seed reproduce the ground truth bit-exactly: every
    draw comes from a counter-based stream keyed by its (board, core, net)
    coordinates, so generation order and thread count cannot change it.
    """
    serials = spec.board_serials()
    lo, hi = spec.length_range_in
    d_lo, d_hi = spec.designed_skew_range_ps
    tau_in = spec.delay_per_inch_s
    alpha4 = spec.alpha_4ghz_db_in

    layout: dict[str, dict[str, float]] = {}
    rng = _stream(spec.seed, _LAYOUT_STREAM)
    for i in range(spec.nets_per_board):
        name = f"n{i:05d}"
        length = float(rng.uniform(lo, hi))
        core = int(rng.integers(0, spec.cores))
        designed = float(rng.uniform(d_lo, d_hi)) * (1.0 if rng.random() < 0.5 else -1.0)
        delta_len = designed * 1e-12 / tau_in
        layout[name] = {
            "length_in": length,
            "len_p_in": length + delta_len / 2.0,
            "len_n_in": length - delta_len / 2.0,
            "core": core,
            "designed_skew_ps": designed,
        }

    board_offsets: dict[str, dict[str, float]] = {}
    for b, serial in enumerate(serials):
        g = _stream(spec.seed, _BOARD_STREAM, b)
        board_offsets[serial] = {
            "z_ohm": float(g.normal(0.0, spec.sigma_z_board_ohm)) if spec.sigma_z_board_ohm else 0.0,
            "loss_db_in": float(g.normal(0.0, spec.sigma_loss_board_db_in)) if spec.sigma_loss_board_db_in else 0.0,
            "skew_ps": float(g.normal(0.0, spec.sigma_skew_board_ps)) if spec.sigma_skew_board_ps else 0.0,
        }

    core_offsets: dict[int, dict[str, float]] = {}
    for c in range(spec.cores):
        g = _stream(spec.seed, _CORE_STREAM, c)
        core_offsets[c] = {
            "z_ohm": float(g.normal(0.0, spec.sigma_z_core_ohm)) if spec.sigma_z_core_ohm else 0.0,
            "loss_db_in": float(g.normal(0.0, spec.sigma_loss_core_db_in)) if spec.sigma_loss_core_db_in else 0.0,
            "skew_ps": float(g.normal(0.0, spec.sigma_skew_core_ps)) if spec.sigma_skew_core_ps else 0.0,
        }

    truth = GroundTruth(spec=spec, board_offsets=board_offsets, core_offsets=core_offsets, layout=layout)
    records: list[NetRecord] = []
    for b, serial in enumerate(serials):
        b_off = board_offsets[serial]
        for i in range(spec.nets_per_board):
            name = f"n{i:05d}"
            lay = layout[name]
            c_off = core_offsets[int(lay["core"])]
            g = _stream(spec.seed, _NET_STREAM, b, i)
            z_noise = float(g.normal(0.0, spec.sigma_z_net_ohm)) if spec.sigma_z_net_ohm else 0.0
            l_noise = float(g.normal(0.0, spec.sigma_loss_net_db_in)) if spec.sigma_loss_net_db_in else 0.0
            s_noise = float(g.normal(0.0, spec.sigma_skew_net_ps)) if spec.sigma_skew_net_ps else 0.0

            random_ps = b_off["skew_ps"] + c_off["skew_ps"] + s_noise
            random_ps += spec.skew_per_inch_ps * lay["length_in"]
            z_odd = max(spec.z_odd_nom_ohm + b_off["z_ohm"] + c_off["z_ohm"] + z_noise, 1.0)
            alpha_scale = max(
                1.0 + (b_off["loss_db_in"] + c_off["loss_db_in"] + l_noise) / alpha4, 0.0
            )
            params = NetParams(
                z_odd_ohm=z_odd,
                tau_p_s=lay["len_p_in"] * tau_in + random_ps * 1e-12 / 2.0,
                tau_n_s=lay["len_n_in"] * tau_in - random_ps * 1e-12 / 2.0,
                len_p_in=lay["len_p_in"],
                len_n_in=lay["len_n_in"],
                alpha_scale=alpha_scale,
                designed_skew_ps=lay["designed_skew_ps"],
                random_skew_ps=random_ps,
            )
            truth.nets[GroundTruth.key(serial, name)] = params
            records.append(
                NetRecord(
                    net_name=name,
                    board_serial=serial,
                    routing_core=int(lay["core"]),
                    len_p_in=lay["len_p_in"],
                    len_n_in=lay["len_n_in"],
                    tester_id=spec.tester_id,
                    s4p_path=f"{serial}_{name}.s4p",
                )
            )
    return Population(spec, records, truth)


def write_population(pop: Population, out_dir, precision: int = 9) -> dict[str, str]:
    """Emit .s4p files, manifest.csv, and ground_truth.json under ``out_dir``."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    for record, net in pop.networks():
        save_touchstone(net, os.path.join(out_dir, record.s4p_path), precision=precision)
    manifest = os.path.join(out_dir, "manifest.csv")
    with open(manifest, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(MANIFEST_COLUMNS) + "\n")
        for r in pop.records:
            handle.write(
                f"{r.net_name},{r.board_serial},{r.routing_core},"
                f"{r.len_p_in:.9g},{r.len_n_in:.9g},{r.tester_id},{r.s4p_path}\n"
            )
    truth_path = os.path.join(out_dir, "ground_truth.json")
    pop.truth.to_json(truth_path)
    return {"manifest": manifest, "ground_truth": truth_path, "dir": str(out_dir)}
