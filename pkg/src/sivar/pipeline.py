"""Batch reduction of measured nets to the per-net outcome table.

A board-level pre-pass derives the reference propagation velocity from the
longest net on each board; the per-net work is pure and runs as a
deterministic parallel map with an ordered reduce, so the table is identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import linksim, metrics, tdr
from .dataset import NetRecord, OutcomeTable
from .sparams import NetworkData, apply_port_map, read_touchstone, to_mixed_mode

__all__ = ["AnalysisConfig", "analyze_nets", "analyze_one", "outcome_columns"]

SKEW_FREQS_HZ = (1e9, 2e9, 4e9)
LOSS_FREQS_HZ = (1e9, 2e9, 4e9)
SCD_FREQS_HZ = (1e9, 2e9, 3e9)


def _ghz_tag(f_hz: float) -> str:
    value = f_hz / 1e9
    return f"{value:g}ghz".replace(".", "p")


@dataclass
class AnalysisConfig:
    """Everything cmd_analyze needs beside the manifest."""

    skew_freqs_hz: tuple = SKEW_FREQS_HZ
    loss_freqs_hz: tuple = LOSS_FREQS_HZ
    scd_freqs_hz: tuple = SCD_FREQS_HZ
    sdd11_threshold_db: float = -10.0
    rate_gbps: float = 2.5
    samples_per_ui: int = 32
    # Default swing calibrated so the default synthetic population's mean
    # eye height lands on 0.783 V.
    driver_amplitude_v: float = 1.21
    driver_edge_s: float = 40e-12
    driver: linksim.DriverWaveform | None = None
    fixed_components: list = field(default_factory=list)
    pattern_order: int = 7
    compute_eye: bool = True
    compute_tdr: bool = True
    tdr_window_s: float = 2e-9
    tdr_t_start_s: float | None = None
    v_ref_freq_hz: float = 1e9
    expect_z_ref: float | None = 50.0
    threads: int = 1

    @property
    def ui_s(self) -> float:
        return 1.0 / (self.rate_gbps * 1e9)

    def resolved_driver(self) -> linksim.DriverWaveform:
        if self.driver is not None:
            return self.driver
        return linksim.trapezoid_driver(
            self.ui_s,
            samples_per_ui=self.samples_per_ui,
            amplitude_v=self.driver_amplitude_v,
            edge_s=self.driver_edge_s,
        )


def outcome_columns(config: AnalysisConfig) -> tuple[list[str], dict[str, str]]:
    cols = ["net_name", "board_serial", "routing_core", "len_p_in", "len_n_in", "tester_id"]
    units = {
        "net_name": "text",
        "board_serial": "text",
        "routing_core": "index",
        "len_p_in": "in",
        "len_n_in": "in",
        "tester_id": "text",
    }
    for f in config.skew_freqs_hz:
        col = f"random_skew_ps_{_ghz_tag(f)}"
        cols.append(col)
        units[col] = "ps"
    for f in config.loss_freqs_hz:
        col = f"loss_db_per_in_{_ghz_tag(f)}"
        cols.append(col)
        units[col] = "dB/in"
    for f in config.scd_freqs_hz:
        col = f"scd21_db_{_ghz_tag(f)}"
        cols.append(col)
        units[col] = "dB"
    cols.append("f_sdd11_minus10db_hz")
    units["f_sdd11_minus10db_hz"] = "Hz"
    if config.compute_tdr:
        cols += ["impedance_odd_ohm", "impedance_window_start_s"]
        units["impedance_odd_ohm"] = "ohm"
        units["impedance_window_start_s"] = "s"
    if config.compute_eye:
        cols += ["eye_height_v", "eye_width_ui", "eye_jitter_ui", "eye_noise_v"]
        units.update(
            eye_height_v="V", eye_width_ui="UI", eye_jitter_ui="UI", eye_noise_v="V"
        )
    cols += ["status", "error"]
    units["status"] = "text"
    units["error"] = "text"
    return cols, units


def _board_velocity(records, loader, config) -> float:
    """v_ref of one board: load its longest net and take length over flight time."""
    rec = max(records, key=lambda r: r.mean_len_in)
    net = loader(rec)
    return metrics.board_velocity(
        [(net, rec.len_p_in, rec.len_n_in)], f_ref_hz=config.v_ref_freq_hz
    )


LOSS_NOISE_FLOOR_DB_IN = -0.05


def analyze_one(rec: NetRecord, net: NetworkData, v_ref: float, config: AnalysisConfig,
                driver=None, pattern=None) -> metrics.OutcomeRow:
    """Reduce one measured net to its scalar outcomes."""
    mm = to_mixed_mode(net)
    out = metrics.OutcomeRow(net_id=f"{rec.board_serial}/{rec.net_name}")
    for f in config.skew_freqs_hz:
        out.random_skew_ps[f] = metrics.random_skew(net, rec.len_p_in, rec.len_n_in, v_ref, f)
    for f in config.loss_freqs_hz:
        loss = metrics.loss_per_inch(mm, rec.len_p_in, rec.len_n_in, f)
        if loss < LOSS_NOISE_FLOOR_DB_IN:
            raise ValueError(
                f"loss {loss:.3f} dB/in at {f:g} Hz below the {LOSS_NOISE_FLOOR_DB_IN} noise floor"
            )
        out.loss_db_per_in[f] = loss
    for f in config.scd_freqs_hz:
        out.scd21_db[f] = metrics.scd21_db(mm, f)
    out.f_sdd11_minus10db_hz = metrics.sdd11_crossing(mm, config.sdd11_threshold_db)
    if config.compute_tdr:
        trace = tdr.step_response(mm.freqs_hz, mm.sdd[:, 0, 0], mm.z_ref_diff_ohm)
        t_start = config.tdr_t_start_s
        if t_start is None:
            t_start = tdr.find_settle_time(trace)
        out.impedance_odd_ohm = tdr.windowed_impedance(trace, t_start, config.tdr_window_s)
        out.impedance_window_start_s = t_start
    if config.compute_eye:
        eye = linksim.simulate_link(mm.sdd_twoport(), config.fixed_components, driver, pattern)
        out.eye_height_v = eye.eye_height_v
        out.eye_width_ui = eye.eye_width_ui
        out.eye_jitter_ui = eye.jitter_ui
        out.eye_noise_v = eye.vertical_eye_noise_v
    return out


def _flatten(rec: NetRecord, out: metrics.OutcomeRow, config: AnalysisConfig) -> dict:
    row: dict = {
        "net_name": rec.net_name,
        "board_serial": rec.board_serial,
        "routing_core": rec.routing_core,
        "len_p_in": rec.len_p_in,
        "len_n_in": rec.len_n_in,
        "tester_id": rec.tester_id,
        "status": "ok",
        "error": None,
    }
    for f in config.skew_freqs_hz:
        row[f"random_skew_ps_{_ghz_tag(f)}"] = out.random_skew_ps[f]
    for f in config.loss_freqs_hz:
        row[f"loss_db_per_in_{_ghz_tag(f)}"] = out.loss_db_per_in[f]
    for f in config.scd_freqs_hz:
        row[f"scd21_db_{_ghz_tag(f)}"] = out.scd21_db[f]
    row["f_sdd11_minus10db_hz"] = out.f_sdd11_minus10db_hz
    if config.compute_tdr:
        row["impedance_odd_ohm"] = out.impedance_odd_ohm
        row["impedance_window_start_s"] = out.impedance_window_start_s
    if config.compute_eye:
        row["eye_height_v"] = out.eye_height_v
        row["eye_width_ui"] = out.eye_width_ui
        row["eye_jitter_ui"] = out.eye_jitter_ui
        row["eye_noise_v"] = out.eye_noise_v
    return row


def analyze_nets(records, config: AnalysisConfig | None = None, loader=None):
    """Reduce every net to its outcome row.

    ``loader`` maps a NetRecord to a NetworkData (defaults to reading the
    record's .s4p file); injecting a loader lets a synthetic population run
    through the identical path without touching disk. Per-net failures are
    recorded on the row and do not abort the batch.

    Returns (OutcomeTable, failures) where failures is a list of
    (record, message).
    """
    config = config or AnalysisConfig()
    records = list(records)
    if loader is None:
        def loader(rec: NetRecord) -> NetworkData:
            net = read_touchstone(rec.s4p_path, expect_z_ref=config.expect_z_ref)
            if rec.port_map is not None:
                net = apply_port_map(
                    NetworkData(
                        freqs_hz=net.freqs_hz, s=net.s, z_ref_ohm=net.z_ref_ohm,
                        port_map=rec.port_map,
                    )
                )
            return net

    cols, units = outcome_columns(config)
    table = OutcomeTable(columns=cols, units=units)
    failures: list[tuple[NetRecord, str]] = []
    if not records:
        return table, failures

    driver = config.resolved_driver() if config.compute_eye else None
    pattern = linksim.prbs_bits(config.pattern_order) if config.compute_eye else None

    velocities: dict[str, float] = {}
    for serial in sorted({r.board_serial for r in records}):
        board_recs = [r for r in records if r.board_serial == serial]
        try:
            velocities[serial] = _board_velocity(board_recs, loader, config)
        except Exception as exc:  # pre-pass failure poisons the board, not the run
            velocities[serial] = float("nan")
            failures.append((board_recs[0], f"board velocity pre-pass failed: {exc}"))

    def worker(rec: NetRecord):
        try:
            net = loader(rec)
            out = analyze_one(rec, net, velocities[rec.board_serial], config, driver, pattern)
            return _flatten(rec, out, config)
        except Exception as exc:
            return {
                "net_name": rec.net_name,
                "board_serial": rec.board_serial,
                "routing_core": rec.routing_core,
                "len_p_in": rec.len_p_in,
                "len_n_in": rec.len_n_in,
                "tester_id": rec.tester_id,
                "status": "failed",
                "error": str(exc),
            }

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(worker, records))
    else:
        rows = [worker(rec) for rec in records]

    for rec, row in zip(records, rows):
        if row.get("status") == "failed":
            failures.append((rec, row.get("error") or "unknown failure"))
        table.add_row(row)
    return table, failures
