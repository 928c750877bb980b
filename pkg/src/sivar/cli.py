"""Batch command line: synth, analyze, report, snv, anova, samplesize, eye.

Exit codes: 0 success, 1 usage error, 2 per-net failure threshold exceeded.
Options may come from a JSON config file (--config); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import linksim, report, stats, synth
from .dataset import export, load_manifest, load_outcomes_csv
from .pipeline import AnalysisConfig, analyze_nets
from .sparams import cascade_diff, read_touchstone, to_mixed_mode

FAILURE_THRESHOLD = 0.01


class UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageExit(1)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        cfg = json.load(handle)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _resolve(args, cfg: dict, name: str, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _parse_freq_list(text: str) -> tuple:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _load_tester_sigma(path) -> dict[str, float]:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return {str(k): float(v) for k, v in raw.items()}


def _analysis_config(args, cfg) -> AnalysisConfig:
    rate = float(_resolve(args, cfg, "rate_gbps", 2.5))
    tdr_t_start = cfg.get("tdr_t_start_s")
    config = AnalysisConfig(
        skew_freqs_hz=_parse_freq_list(_resolve(args, cfg, "freqs", "1e9,2e9,4e9")),
        loss_freqs_hz=_parse_freq_list(_resolve(args, cfg, "loss_freqs", "1e9,2e9,4e9")),
        scd_freqs_hz=_parse_freq_list(_resolve(args, cfg, "scd_freqs", "1e9,2e9,3e9")),
        sdd11_threshold_db=float(cfg.get("sdd11_threshold_db", -10.0)),
        rate_gbps=rate,
        samples_per_ui=int(_resolve(args, cfg, "samples_per_ui", 32)),
        driver_amplitude_v=float(_resolve(args, cfg, "amplitude", 1.21)),
        threads=int(_resolve(args, cfg, "threads", 1)),
        compute_eye=not bool(_resolve(args, cfg, "no_eye", False)),
        compute_tdr=not bool(_resolve(args, cfg, "no_tdr", False)),
        tdr_window_s=float(cfg.get("tdr_window_s", 2e-9)),
        tdr_t_start_s=float(tdr_t_start) if tdr_t_start is not None else None,
    )
    driver_path = _resolve(args, cfg, "driver", None)
    if driver_path:
        config.driver = linksim.load_driver(driver_path)
    for fixed_path in _resolve(args, cfg, "fixed", None) or []:
        net = read_touchstone(fixed_path)
        config.fixed_components.append(to_mixed_mode(net).sdd_twoport())
    return config


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    if args.spec:
        spec = synth.PopulationSpec.from_json(args.spec)
    else:
        spec = synth.PopulationSpec()
    if args.seed is not None:
        spec = synth.PopulationSpec(**{**_spec_dict(spec), "seed": args.seed})
    pop = synth.generate_population(spec)
    paths = synth.write_population(pop, args.out, precision=int(_resolve(args, cfg, "precision", 9)))
    print(f"wrote {len(pop.records)} nets across {spec.boards} boards to {paths['dir']}")
    print(f"manifest: {paths['manifest']}")
    print(f"ground truth: {paths['ground_truth']}")
    return 0


def _spec_dict(spec) -> dict:
    from dataclasses import asdict

    return asdict(spec)


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    config = _analysis_config(args, cfg)
    records = load_manifest(args.manifest)
    table, failures = analyze_nets(records, config)
    os.makedirs(args.out, exist_ok=True)
    table.sort_canonical()
    out_csv = os.path.join(args.out, "outcomes.csv")
    export(table, "csv", out_csv)
    export(table, "json", os.path.join(args.out, "outcomes.json"))
    if failures:
        with open(os.path.join(args.out, "failures.log"), "w", encoding="utf-8", newline="\n") as handle:
            for rec, msg in failures:
                handle.write(f"{rec.board_serial}/{rec.net_name}: {msg}\n")
    n_failed = sum(1 for row in table.rows if row.get("status") == "failed")
    print(f"analyzed {len(table.rows)} nets, {n_failed} failed; outcomes: {out_csv}")
    if records and n_failed / len(records) > FAILURE_THRESHOLD:
        print(
            f"error: {n_failed}/{len(records)} nets failed "
            f"(> {FAILURE_THRESHOLD:.0%} threshold)",
            file=sys.stderr,
        )
        return 2
    return 0


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    table = load_outcomes_csv(args.outcomes)
    rconfig = report.ReportConfig(
        tester_sigma=_load_tester_sigma(_resolve(args, cfg, "tester_sigma", None)),
        sigma_k=float(_resolve(args, cfg, "sigma_k", 5.0)),
    )
    paths = report.write_report(table, args.out, rconfig)
    for name in ("figure1", "figure2", "figure3"):
        print(f"{name}: {paths[name]}")
    return 0


def cmd_snv(args) -> int:
    cfg = _load_config(args.config)
    table = load_outcomes_csv(args.outcomes)
    tester = _load_tester_sigma(_resolve(args, cfg, "tester_sigma", None))
    rconfig = report.ReportConfig(tester_sigma=tester)
    rows = report.snv_rows(table, rconfig)
    if args.out:
        export(rows, "csv", args.out)
        print(f"snv table: {args.out}")
    else:
        for row in rows:
            sigma = row["SNV σ"]
            if sigma is None:
                continue
            print(f"{row['Calculation']}: SNV sigma = {sigma:.6g} ({row['Groups Used']} groups)")
    return 0


def cmd_anova(args) -> int:
    table = load_outcomes_csv(args.outcomes)
    rconfig = report.ReportConfig()
    cells = report.anova_grid(table, rconfig)
    labels = report.outcome_labels(table)
    report._write_anova_csv(args.out, cells, labels)
    print(f"anova table: {args.out}")
    return 0


def cmd_samplesize(args) -> int:
    cfg = _load_config(args.config)
    table = load_outcomes_csv(args.outcomes)
    values = table.column(args.column)
    values = values[np.isfinite(values)]
    sizes = [int(s) for s in _resolve(args, cfg, "sizes", "10,30,100,300,1000,2000").split(",")]
    sizes = [s for s in sizes if s <= values.size]
    if not sizes:
        print("error: pool smaller than every requested size", file=sys.stderr)
        return 1
    rows = stats.sample_size_experiment(
        values,
        sizes,
        trials=int(_resolve(args, cfg, "trials", 500)),
        seed=int(_resolve(args, cfg, "seed", 0)),
    )
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "samplesize.csv")
    flat = [
        {
            "n": r.n,
            "trials": r.trials,
            "min_rel_err": r.min_rel_err,
            "max_rel_err": r.max_rel_err,
            "max_abs_rel_err": r.max_abs_rel_err,
            **r.quantiles,
        }
        for r in rows
    ]
    export(flat, "csv", out_csv)
    report_path = os.path.join(args.out, "samplesize.svg")
    _render_samplesize(rows, report_path)
    print(f"samplesize envelope: {out_csv}")
    return 0


def _render_samplesize(rows, path):
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    n = [r.n for r in rows]
    ax.fill_between(n, [r.min_rel_err * 100 for r in rows], [r.max_rel_err * 100 for r in rows],
                    alpha=0.3, color="#4878a8", label="min/max")
    ax.plot(n, [r.quantiles.get("q05", 0) * 100 for r in rows], "--", color="#30506e")
    ax.plot(n, [r.quantiles.get("q95", 0) * 100 for r in rows], "--", color="#30506e", label="5/95%")
    ax.axhline(0.0, color="k", linewidth=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("Sample size n")
    ax.set_ylabel("Relative sigma error (%)")
    ax.legend()
    fig.tight_layout()
    import matplotlib

    with matplotlib.rc_context({"svg.hashsalt": "sivar"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def cmd_eye(args) -> int:
    cfg = _load_config(args.config)
    config = _analysis_config(args, cfg)
    net = read_touchstone(args.s4p)
    channel = to_mixed_mode(net).sdd_twoport()
    driver = config.resolved_driver()
    pattern = linksim.prbs_bits(config.pattern_order)
    for block in config.fixed_components:
        channel = cascade_diff(channel, block)
    eye = linksim.synthesize_eye(channel, driver, pattern)
    m = linksim.extract_metrics(eye)
    print(f"eye height: {m.eye_height_v:.6g} V")
    print(f"eye width: {m.eye_width_ui:.6g} UI")
    print(f"jitter: {m.jitter_ui:.6g} UI")
    print(f"vertical eye noise: {m.vertical_eye_noise_v:.6g} V")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "eye.csv")
        _eye_to_csv(eye, csv_path)
        svg_path = os.path.join(args.out, "eye.svg")
        _render_eye(eye, svg_path)
        print(f"eye trace matrix: {csv_path}")
        print(f"eye figure: {svg_path}")
    return 0


def _eye_to_csv(eye, path):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        cols = ",".join(f"t{i}" for i in range(eye.traces.shape[1]))
        handle.write(f"trace,{cols}\n")
        for k, trace in enumerate(eye.traces):
            handle.write(str(k) + "," + ",".join(f"{v:.9g}" for v in trace) + "\n")


def _render_eye(eye, path):
    import matplotlib
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot(111)
    t_ui = np.arange(eye.traces.shape[1]) / eye.samples_per_ui
    for trace in eye.traces:
        ax.plot(t_ui, trace, color="#30506e", alpha=0.25, linewidth=0.7)
    ax.set_xlabel("Time (UI)")
    ax.set_ylabel("Volts")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "sivar"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def build_parser() -> _Parser:
    parser = _Parser(prog="sivar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of option defaults; flags win")

    p = sub.add_parser("synth", help="generate a synthetic board population")
    common(p)
    p.add_argument("--spec", help="population spec JSON (defaults used when omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="reduce measured nets to the outcome table")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate-gbps", dest="rate_gbps", type=float)
    p.add_argument("--freqs", help="skew sample frequencies, Hz, comma separated")
    p.add_argument("--loss-freqs", dest="loss_freqs")
    p.add_argument("--scd-freqs", dest="scd_freqs")
    p.add_argument("--threads", type=int)
    p.add_argument("--driver", help="driver waveform CSV")
    p.add_argument("--amplitude", type=float, help="default trapezoid driver swing, volts")
    p.add_argument("--fixed", action="append", help="fixed link component .s4p (repeatable)")
    p.add_argument("--no-eye", dest="no_eye", action="store_const", const=True)
    p.add_argument("--no-tdr", dest="no_tdr", action="store_const", const=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="figure tables and plots from an outcome table")
    common(p)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tester-sigma", dest="tester_sigma", help="JSON of outcome label to tester sigma")
    p.add_argument("--sigma-k", dest="sigma_k", type=float)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("snv", help="same-net variation table")
    common(p)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out")
    p.add_argument("--tester-sigma", dest="tester_sigma")
    p.set_defaults(func=cmd_snv)

    p = sub.add_parser("anova", help="ANOVA grid for every outcome")
    common(p)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_anova)

    p = sub.add_parser("samplesize", help="sigma-estimate spread versus sample size")
    common(p)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sizes")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_samplesize)

    p = sub.add_parser("eye", help="eye metrics of a single net")
    common(p)
    p.add_argument("--s4p", required=True)
    p.add_argument("--out")
    p.add_argument("--rate-gbps", dest="rate_gbps", type=float)
    p.add_argument("--driver")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--fixed", action="append")
    p.set_defaults(func=cmd_eye)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageExit as exc:
        return exc.code or 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"sivar: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
