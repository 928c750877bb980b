"""Report tables and figures: global summary, same-net variation, ANOVA grid.

Three delimited tables mirror the standard result layouts (figure1.csv:
global summary statistics, figure2.csv: same-net variation with tester
deflation, figure3.csv: one ANOVA per outcome with predictors as rows), and
the figure path renders SVG histograms and scatters with CSV data sidecars
next to them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from . import stats
from .dataset import OutcomeTable, export, format_number, same_net_grouping

__all__ = [
    "ReportConfig",
    "outcome_labels",
    "global_summary_rows",
    "snv_rows",
    "anova_grid",
    "write_report",
]

_SVG_OPTS = {"format": "svg", "metadata": {"Date": None}}


@dataclass
class ReportConfig:
    tester_sigma: dict[str, float] = field(default_factory=dict)
    sigma_k: float = 5.0
    skew_predictor_outcomes: tuple = ("scd21_db_1ghz",)
    histogram_bins: int = 60


def _tag_to_ghz(tag: str) -> str:
    return tag.replace("p", ".").removesuffix("ghz")


def outcome_labels(table: OutcomeTable) -> list[tuple[str, str]]:
    """(column, display label) pairs in the standard summary order."""
    pairs: list[tuple[str, str]] = []

    def add(prefix: str, template: str):
        for col in table.columns:
            if col.startswith(prefix):
                tag = col.removeprefix(prefix)
                pairs.append((col, template.format(_tag_to_ghz(tag))))

    add("random_skew_ps_", "Random Skew (ps): {} GHz")
    for col, label in (
        ("eye_height_v", "Eye Height (volts)"),
        ("eye_width_ui", "Eye Width (UI)"),
        ("eye_jitter_ui", "Eye Jitter (UI)"),
        ("eye_noise_v", "Vertical Eye Noise (volts)"),
    ):
        if col in table.columns:
            pairs.append((col, label))
    add("loss_db_per_in_", "SDD21 dB/In: {} GHz")
    add("scd21_db_", "SCD21 (dB): {} GHz")
    if "impedance_odd_ohm" in table.columns:
        pairs.append(("impedance_odd_ohm", "Impedance (Ω)"))
    if "f_sdd11_minus10db_hz" in table.columns:
        pairs.append(("f_sdd11_minus10db_hz", "Freq, SDD11 @ -10 dB"))
    return pairs


def _ok_rows(table: OutcomeTable) -> list[dict]:
    return [r for r in table.rows if r.get("status", "ok") == "ok"]


def global_summary_rows(table: OutcomeTable, config: ReportConfig) -> list[dict]:
    rows = []
    ok = _ok_rows(table)
    for col, label in outcome_labels(table):
        values = table.column(col, ok)
        values = values[np.isfinite(values)]
        entry = {
            "Calculation": label,
            "N": values.size,
            "Mean": None,
            "Std Dev": None,
            "Min": None,
            "Max": None,
            "Tester Repeatability (Std Dev)": config.tester_sigma.get(label),
            "Skewness": None,
            "Kurtosis": None,
        }
        if values.size >= 2:
            s = stats.summarize(values)
            entry.update({
                "Mean": s.mean, "Std Dev": s.std, "Min": s.min, "Max": s.max,
                "Skewness": s.skewness, "Kurtosis": s.kurtosis,
            })
        rows.append(entry)
    return rows


def snv_rows(table: OutcomeTable, config: ReportConfig) -> list[dict]:
    """Same-net variation per outcome, deflated where a tester sigma exists.

    The k-sigma half-width column extrapolates the deflated sigma with the
    configured multiple (default 5) for worst-case estimates.
    """
    rows = []
    ok_table = OutcomeTable(columns=table.columns, units=table.units, rows=_ok_rows(table))
    for col, label in outcome_labels(table):
        groups = same_net_grouping(ok_table, col)
        entry = {
            "Calculation": label,
            "SNV σ": None,
            "Groups Used": 0,
            "Groups Dropped": 0,
            "Tester σ": config.tester_sigma.get(label),
            "Deflated σ": None,
            "Tester Dominated": None,
            "Deflation Applied": False,
            "Sigma Multiple k": config.sigma_k,
            "k-sigma Half-Width": None,
        }
        try:
            snv = stats.pooled_snv(groups.values())
        except ValueError:
            rows.append(entry)
            continue
        entry["SNV σ"] = snv.sigma
        entry["Groups Used"] = snv.groups_used
        entry["Groups Dropped"] = snv.groups_dropped
        tester = config.tester_sigma.get(label)
        if tester is None:
            entry["Deflated σ"] = snv.sigma
        else:
            d = stats.deflate_tester(snv.sigma, tester)
            entry["Deflated σ"] = d.sigma_true
            entry["Tester Dominated"] = d.tester_dominated
            entry["Deflation Applied"] = True
        lo, hi = stats.k_sigma_interval(0.0, entry["Deflated σ"], config.sigma_k)
        entry["k-sigma Half-Width"] = (hi - lo) / 2.0
        rows.append(entry)
    return rows


_PREDICTOR_ROWS = ["Net Length", "Routing Core", "Serial Number", "Random Skew, (1 GHz)"]
_STATISTICS = ["F-Ratio", "MSE-Ratio", "p-value"]


def anova_grid(table: OutcomeTable, config: ReportConfig):
    """One ANOVA per outcome; cells keyed (predictor, statistic, outcome label).

    Predictors are net length (continuous), routing core and board serial
    (categorical), plus random skew magnitude as an extra predictor for the
    configured mode-conversion outcomes (the dB conversion is even in skew,
    so the signed value would test as uncorrelated). Categoricals with a
    single level present (one board, one core) are skipped for that outcome.
    """
    ok = _ok_rows(table)
    labels = outcome_labels(table)
    mean_len = (table.column("len_p_in", ok) + table.column("len_n_in", ok)) / 2.0
    cores = np.asarray([str(r["routing_core"]) for r in ok])
    serials = np.asarray([str(r["board_serial"]) for r in ok])
    skew_col = "random_skew_ps_1ghz"
    skew = np.abs(table.column(skew_col, ok)) if skew_col in table.columns else None

    cells: dict[tuple[str, str, str], float] = {}
    for col, label in labels:
        y = table.column(col, ok)
        keep = np.isfinite(y) & np.isfinite(mean_len)
        use_skew = col in config.skew_predictor_outcomes and skew is not None
        if use_skew:
            keep &= np.isfinite(skew)
        if keep.sum() < 8:
            continue
        predictors = [stats.PredictorSpec("Net Length", "continuous", mean_len[keep])]
        if np.unique(cores[keep]).size >= 2:
            predictors.append(stats.PredictorSpec("Routing Core", "categorical", cores[keep]))
        if np.unique(serials[keep]).size >= 2:
            predictors.append(stats.PredictorSpec("Serial Number", "categorical", serials[keep]))
        if use_skew:
            predictors.append(
                stats.PredictorSpec("Random Skew, (1 GHz)", "continuous", skew[keep])
            )
        try:
            result = stats.anova(y[keep], predictors)
        except ValueError:
            continue
        for name, ps in result.predictors.items():
            cells[(name, "F-Ratio", label)] = ps.f_stat
            cells[(name, "MSE-Ratio", label)] = ps.mse_ratio
            cells[(name, "p-value", label)] = ps.p_value
    return cells


def _write_anova_csv(path, cells, labels):
    import csv

    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["Predictor", "Statistic"] + [label for _, label in labels])
        for predictor in _PREDICTOR_ROWS:
            if not any(key[0] == predictor for key in cells):
                continue
            for statistic in _STATISTICS:
                row = [predictor, statistic]
                for _, label in labels:
                    row.append(format_number(cells.get((predictor, statistic, label))))
                writer.writerow(row)


def _save_svg(fig: Figure, path):
    with matplotlib.rc_context({"svg.hashsalt": "sivar"}):
        fig.savefig(path, **_SVG_OPTS)


def _histogram(path_base, values, label, bins):
    counts, edges = np.histogram(values, bins=bins)
    with open(path_base + ".csv", "w", encoding="utf-8", newline="\n") as handle:
        handle.write("bin_left,bin_right,count\n")
        for i, c in enumerate(counts):
            handle.write(f"{edges[i]:.9g},{edges[i + 1]:.9g},{int(c)}\n")
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    ax.stairs(counts, edges, fill=True, color="#4878a8")
    ax.set_xlabel(label)
    ax.set_ylabel("Count")
    ax.set_title(f"{label} (n={values.size})")
    fig.tight_layout()
    _save_svg(fig, path_base + ".svg")


def _scatter(path_base, x, y, xlabel, ylabel):
    with open(path_base + ".csv", "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{xlabel.replace(',', ';')},{ylabel.replace(',', ';')}\n")
        for xi, yi in zip(x, y):
            handle.write(f"{xi:.9g},{yi:.9g}\n")
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    ax.plot(x, y, ".", markersize=2, alpha=0.5, color="#30506e")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    _save_svg(fig, path_base + ".svg")


_HISTOGRAM_COLUMNS = [
    ("eye_height_v", "Eye Height (volts)"),
    ("eye_width_ui", "Eye Width (UI)"),
    ("eye_jitter_ui", "Eye Jitter (UI)"),
    ("eye_noise_v", "Vertical Eye Noise (volts)"),
    ("impedance_odd_ohm", "Impedance (ohm)"),
]


def write_report(table: OutcomeTable, out_dir, config: ReportConfig | None = None) -> dict[str, str]:
    """Write figure1/figure2/figure3 CSVs plus SVG histograms and scatters.

    Returns a name-to-path map of everything written.
    """
    config = config or ReportConfig()
    os.makedirs(out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    summary = global_summary_rows(table, config)
    fig1 = os.path.join(out_dir, "figure1.csv")
    export(summary, "csv", fig1)
    export(summary, "json", os.path.join(out_dir, "figure1.json"))
    paths["figure1"] = fig1

    snv = snv_rows(table, config)
    fig2 = os.path.join(out_dir, "figure2.csv")
    export(snv, "csv", fig2)
    export(snv, "json", os.path.join(out_dir, "figure2.json"))
    paths["figure2"] = fig2

    labels = outcome_labels(table)
    cells = anova_grid(table, config)
    fig3 = os.path.join(out_dir, "figure3.csv")
    _write_anova_csv(fig3, cells, labels)
    export(
        [
            {"predictor": p, "statistic": s, "outcome": o, "value": v}
            for (p, s, o), v in sorted(cells.items())
        ],
        "json",
        os.path.join(out_dir, "figure3.json"),
    )
    paths["figure3"] = fig3

    ok = _ok_rows(table)
    for col, label in _HISTOGRAM_COLUMNS:
        if col not in table.columns:
            continue
        values = table.column(col, ok)
        values = values[np.isfinite(values)]
        if values.size < 2:
            continue
        base = os.path.join(out_dir, f"hist_{col}")
        _histogram(base, values, label, config.histogram_bins)
        paths[f"hist_{col}"] = base + ".svg"

    mean_len = (table.column("len_p_in", ok) + table.column("len_n_in", ok)) / 2.0
    for col, ylabel, name in (
        ("eye_height_v", "Eye Height (volts)", "scatter_eye_height_vs_length"),
        ("random_skew_ps_1ghz", "Random Skew (ps): 1 GHz", "scatter_skew_vs_length"),
    ):
        if col not in table.columns:
            continue
        y = table.column(col, ok)
        keep = np.isfinite(y) & np.isfinite(mean_len)
        if keep.sum() < 2:
            continue
        base = os.path.join(out_dir, name)
        _scatter(base, mean_len[keep], y[keep], "Net Length (in)", ylabel)
        paths[name] = base + ".svg"
    return paths
