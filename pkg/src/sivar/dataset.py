"""Manifest loading, the per-net outcome table, and byte-stable exports."""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetRecord",
    "OutcomeTable",
    "ManifestError",
    "MANIFEST_COLUMNS",
    "load_manifest",
    "same_net_grouping",
    "export",
    "format_number",
]

MANIFEST_COLUMNS = [
    "net_name",
    "board_serial",
    "routing_core",
    "len_p_in",
    "len_n_in",
    "tester_id",
    "s4p_path",
]


class ManifestError(ValueError):
    """Invalid manifest content; message names the row and field."""


@dataclass(frozen=True)
class NetRecord:
    """Per-net metadata carried alongside the measurement file.

    ``port_map`` remaps file ports onto the P-near/P-far/N-near/N-far
    convention for files recorded with a different port order; it comes from
    the optional manifest column of the same name (dash separated, e.g.
    ``3-4-1-2``) and is None when the file already follows the convention.
    """

    net_name: str
    board_serial: str
    routing_core: int
    len_p_in: float
    len_n_in: float
    tester_id: str
    s4p_path: str
    port_map: tuple[int, int, int, int] | None = None

    @property
    def mean_len_in(self) -> float:
        return (self.len_p_in + self.len_n_in) / 2.0


def load_manifest(path, check_files: bool = True) -> list[NetRecord]:
    """Read and validate manifest.csv.

    The header must carry the exact column names. Bad lengths and duplicate
    (net_name, board_serial) keys are errors naming the row; referenced
    files that do not exist are reported as warnings so a partial dataset
    can still be analyzed.
    """
    base = os.path.dirname(os.path.abspath(path))
    records: list[NetRecord] = []
    seen: set[tuple[str, str]] = set()
    missing: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for col in MANIFEST_COLUMNS:
            if col not in header:
                raise ManifestError(f"manifest is missing column {col!r}")
        for rownum, row in enumerate(reader, start=2):
            def bad(field_name: str, why: str):
                return ManifestError(f"row {rownum}: field {field_name!r} {why}")

            try:
                core = int(row["routing_core"])
            except ValueError:
                raise bad("routing_core", f"is not an integer: {row['routing_core']!r}") from None
            lengths = {}
            for col in ("len_p_in", "len_n_in"):
                try:
                    lengths[col] = float(row[col])
                except ValueError:
                    raise bad(col, f"is not a number: {row[col]!r}") from None
                if not lengths[col] > 0:
                    raise bad(col, f"must be positive, got {lengths[col]!r}")
            key = (row["net_name"], row["board_serial"])
            if key in seen:
                raise ManifestError(f"row {rownum}: duplicate key (net_name, board_serial) = {key}")
            seen.add(key)
            port_map = None
            raw_map = (row.get("port_map") or "").strip()
            if raw_map:
                try:
                    port_map = tuple(int(tok) for tok in raw_map.split("-"))
                except ValueError:
                    raise bad("port_map", f"is not dash-separated integers: {raw_map!r}") from None
                if sorted(port_map) != [1, 2, 3, 4]:
                    raise bad("port_map", f"must be a permutation of 1-2-3-4, got {raw_map!r}")
            s4p = row["s4p_path"]
            resolved = s4p if os.path.isabs(s4p) else os.path.join(base, s4p)
            if check_files and not os.path.exists(resolved):
                missing.append(s4p)
            records.append(
                NetRecord(
                    net_name=row["net_name"],
                    board_serial=row["board_serial"],
                    routing_core=core,
                    len_p_in=lengths["len_p_in"],
                    len_n_in=lengths["len_n_in"],
                    tester_id=row["tester_id"],
                    s4p_path=resolved,
                    port_map=port_map,
                )
            )
    if missing:
        warnings.warn(
            f"{len(missing)} manifest rows reference missing files (first: {missing[0]})",
            stacklevel=2,
        )
    return records


@dataclass
class OutcomeTable:
    """Rows of net metadata plus scalar outcomes, with units per column."""

    columns: list[str]
    units: dict[str, str]
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for col in self.columns:
            if col not in self.units:
                raise ValueError(f"column {col!r} has no entry in the unit dictionary")
        self._keys = {
            (row.get("net_name"), row.get("board_serial")) for row in self.rows
        }

    def add_row(self, row: dict) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise ValueError(f"row has columns not in the table: {sorted(unknown)}")
        if "net_name" in self.columns and "board_serial" in self.columns:
            key = (row.get("net_name"), row.get("board_serial"))
            if key in self._keys:
                raise ValueError(f"duplicate (net_name, board_serial) key {key}")
            self._keys.add(key)
        self.rows.append({col: row.get(col) for col in self.columns})

    def column(self, name: str, rows=None) -> np.ndarray:
        """Numeric column as floats with missing values as NaN."""
        if name not in self.columns:
            raise KeyError(f"no column {name!r}")
        source = self.rows if rows is None else rows
        return np.asarray(
            [float(r[name]) if r.get(name) is not None else np.nan for r in source], dtype=float
        )

    def sort_canonical(self) -> None:
        self.rows.sort(key=lambda r: (str(r.get("board_serial")), str(r.get("net_name"))))


def format_number(value) -> str:
    """Fixed 9-significant-digit text for floats; passthrough for the rest."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        if value != value:
            return "nan"
        return f"{value:.9g}"
    return str(value)


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.9g}") if obj == obj else None
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.floating):
        return _round_floats(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    return obj


def export(obj, fmt: str, path) -> None:
    """Write a table or a plain stats payload as CSV or JSON.

    Output is byte-stable for a fixed input: sorted JSON keys, fixed float
    formatting at 9 significant digits, LF newlines.
    """
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unsupported export format {fmt!r}")
    if isinstance(obj, OutcomeTable):
        for col in obj.columns:
            if col not in obj.units:
                raise ValueError(f"column {col!r} has no unit; export refused")
        if fmt == "csv":
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(obj.columns)
                for row in obj.rows:
                    writer.writerow([format_number(row.get(c)) for c in obj.columns])
        else:
            payload = {
                "columns": obj.columns,
                "units": obj.units,
                "rows": [_round_floats(row) for row in obj.rows],
            }
            with open(path, "w", encoding="utf-8", newline="\n") as handle:
                json.dump(payload, handle, indent=1, sort_keys=True)
                handle.write("\n")
        return
    if fmt == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(_round_floats(obj), handle, indent=1, sort_keys=True)
            handle.write("\n")
        return
    # CSV for a list of flat dicts (stat tables).
    rows = list(obj)
    if not rows:
        raise ValueError("nothing to export")
    cols = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(cols)
        for row in rows:
            writer.writerow([format_number(row.get(c)) for c in cols])


def import_table(path) -> OutcomeTable:
    """Load a table previously exported as JSON."""
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    table = OutcomeTable(columns=payload["columns"], units=payload["units"])
    for row in payload["rows"]:
        table.add_row(row)
    return table


def load_outcomes_csv(path, units: dict[str, str] | None = None) -> OutcomeTable:
    """Load an outcomes CSV produced by the analysis pipeline.

    Numeric-looking cells become floats, empty cells become None; the unit
    dictionary defaults to 'unknown' per column when not supplied.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        columns = list(reader.fieldnames or [])
        table = OutcomeTable(columns=columns, units=units or {c: "unknown" for c in columns})
        for raw in reader:
            row = {}
            for col in columns:
                cell = raw.get(col, "")
                if cell == "" or cell is None:
                    row[col] = None
                else:
                    try:
                        row[col] = float(cell)
                    except ValueError:
                        row[col] = cell
            table.add_row(row)
    return table


def same_net_grouping(table: OutcomeTable, outcome: str) -> dict[str, list[float]]:
    """Values of one outcome grouped by net_name across boards.

    Nets missing from some boards simply yield smaller groups; single-board
    tables degenerate to size-1 groups (the pooled variance then errors).
    """
    if outcome not in table.columns:
        raise KeyError(f"outcome column {outcome!r} absent from the table")
    groups: dict[str, list[float]] = {}
    for row in table.rows:
        value = row.get(outcome)
        if value is None:
            continue
        value = float(value)
        if value != value:
            continue
        groups.setdefault(str(row["net_name"]), []).append(value)
    return groups
