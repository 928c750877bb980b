import json

import numpy as np
import pytest

from sivar import dataset
from sivar.dataset import ManifestError, OutcomeTable, export, load_manifest, same_net_grouping
from sivar.stats import pooled_snv

HEADER = "net_name,board_serial,routing_core,len_p_in,len_n_in,tester_id,s4p_path\n"


def write_manifest(tmp_path, rows, make_files=True):
    lines = [HEADER]
    for row in rows:
        lines.append(",".join(str(v) for v in row) + "\n")
        if make_files:
            (tmp_path / row[-1]).write_text("")
    path = tmp_path / "manifest.csv"
    path.write_text("".join(lines))
    return path


class TestLoadManifest:
    def test_empty_body(self, tmp_path):
        path = write_manifest(tmp_path, [])
        assert load_manifest(path) == []

    def test_happy_path(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [
                ("n1", "B01", 0, 5.0, 5.1, "auto", "a.s4p"),
                ("n1", "B02", 0, 5.0, 5.1, "auto", "b.s4p"),
            ],
        )
        records = load_manifest(path)
        assert len(records) == 2
        assert records[0].net_name == "n1"
        assert records[0].routing_core == 0
        assert records[0].mean_len_in == pytest.approx(5.05)

    def test_negative_length(self, tmp_path):
        path = write_manifest(tmp_path, [("n1", "B01", 0, -1.0, 5.0, "auto", "a.s4p")])
        with pytest.raises(ManifestError, match=r"row 2.*len_p_in.*positive"):
            load_manifest(path)

    def test_unparseable_length(self, tmp_path):
        path = write_manifest(tmp_path, [("n1", "B01", 0, "abc", 5.0, "auto", "a.s4p")])
        with pytest.raises(ManifestError, match=r"row 2.*len_p_in"):
            load_manifest(path)

    def test_duplicate_key(self, tmp_path):
        path = write_manifest(
            tmp_path,
            [
                ("n1", "B01", 0, 5.0, 5.0, "auto", "a.s4p"),
                ("n1", "B01", 1, 6.0, 6.0, "auto", "b.s4p"),
            ],
        )
        with pytest.raises(ManifestError, match="duplicate key"):
            load_manifest(path)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("net_name,board_serial\nn1,B01\n")
        with pytest.raises(ManifestError, match="missing column"):
            load_manifest(path)

    def test_missing_file_warns(self, tmp_path):
        path = write_manifest(
            tmp_path, [("n1", "B01", 0, 5.0, 5.0, "auto", "gone.s4p")], make_files=False
        )
        with pytest.warns(UserWarning, match="missing files"):
            records = load_manifest(path)
        assert len(records) == 1

    def test_order_insensitive_after_sort(self, tmp_path):
        rows = [
            ("n2", "B01", 0, 5.0, 5.0, "auto", "a.s4p"),
            ("n1", "B02", 1, 6.0, 6.0, "auto", "b.s4p"),
            ("n1", "B01", 1, 6.0, 6.0, "auto", "c.s4p"),
        ]
        p1 = write_manifest(tmp_path, rows)
        r1 = load_manifest(p1)
        sub = tmp_path / "shuffled"
        sub.mkdir()
        p2 = write_manifest(sub, rows[::-1])
        r2 = load_manifest(p2)

        def table_from(records):
            t = OutcomeTable(
                columns=["net_name", "board_serial"], units={"net_name": "text", "board_serial": "text"}
            )
            for r in records:
                t.add_row({"net_name": r.net_name, "board_serial": r.board_serial})
            t.sort_canonical()
            return t.rows

        assert table_from(r1) == table_from(r2)


def small_table():
    t = OutcomeTable(
        columns=["net_name", "board_serial", "skew_ps"],
        units={"net_name": "text", "board_serial": "text", "skew_ps": "ps"},
    )
    for board in ("B01", "B02", "B03"):
        for net, val in (("n1", 1.0), ("n2", 2.0)):
            t.add_row({"net_name": net, "board_serial": board, "skew_ps": val + 0.125})
    return t


class TestExport:
    def test_csv_roundtrip(self, tmp_path):
        t = small_table()
        path = tmp_path / "out.csv"
        export(t, "csv", path)
        again = dataset.load_outcomes_csv(path)
        assert np.abs(again.column("skew_ps") - t.column("skew_ps")).max() < 1e-9

    def test_json_roundtrip(self, tmp_path):
        t = small_table()
        path = tmp_path / "out.json"
        export(t, "json", path)
        again = dataset.import_table(path)
        assert again.columns == t.columns
        assert np.abs(again.column("skew_ps") - t.column("skew_ps")).max() < 1e-9

    def test_nine_digit_precision(self, tmp_path):
        t = OutcomeTable(columns=["x"], units={"x": "V"})
        t.add_row({"x": 0.123456789123456})
        path = tmp_path / "x.csv"
        export(t, "csv", path)
        again = dataset.load_outcomes_csv(path)
        assert abs(again.column("x")[0] - 0.123456789123456) < 1e-9

    def test_empty_table_header_only(self, tmp_path):
        t = OutcomeTable(columns=["a", "b"], units={"a": "V", "b": "s"})
        path = tmp_path / "empty.csv"
        export(t, "csv", path)
        assert path.read_text() == "a,b\n"

    def test_byte_stable(self, tmp_path):
        t = small_table()
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        export(t, "json", p1)
        export(t, "json", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_schema_validation(self, tmp_path):
        import importlib.resources as resources

        import jsonschema

        t = small_table()
        path = tmp_path / "out.json"
        export(t, "json", path)
        schema = json.loads(
            resources.files("sivar").joinpath("schemas/outcome_table.schema.json").read_text()
        )
        jsonschema.validate(json.loads(path.read_text()), schema)

    def test_unit_dictionary_enforced(self):
        with pytest.raises(ValueError, match="unit dictionary"):
            OutcomeTable(columns=["a"], units={})

    def test_stat_rows_export(self, tmp_path):
        rows = [{"n": 10, "sigma": 1.5}, {"n": 30, "sigma": 1.2}]
        path = tmp_path / "stats.csv"
        export(rows, "csv", path)
        assert path.read_text().splitlines()[0] == "n,sigma"

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError, match="unsupported export format"):
            export(small_table(), "xml", tmp_path / "x.xml")


class TestSameNetGrouping:
    def test_groups_across_boards(self):
        groups = same_net_grouping(small_table(), "skew_ps")
        assert set(groups) == {"n1", "n2"}
        assert all(len(v) == 3 for v in groups.values())

    def test_single_board_degenerate(self):
        t = OutcomeTable(
            columns=["net_name", "board_serial", "x"],
            units={"net_name": "text", "board_serial": "text", "x": "V"},
        )
        t.add_row({"net_name": "n1", "board_serial": "B01", "x": 1.0})
        t.add_row({"net_name": "n2", "board_serial": "B01", "x": 2.0})
        groups = same_net_grouping(t, "x")
        assert all(len(v) == 1 for v in groups.values())
        with pytest.raises(ValueError, match="no group"):
            pooled_snv(groups.values())

    def test_partial_coverage(self):
        t = small_table()
        t.add_row({"net_name": "n3", "board_serial": "B01", "skew_ps": 4.0})
        t.add_row({"net_name": "n3", "board_serial": "B03", "skew_ps": 4.5})
        groups = same_net_grouping(t, "skew_ps")
        assert len(groups["n3"]) == 2

    def test_absent_column(self):
        with pytest.raises(KeyError, match="absent"):
            same_net_grouping(small_table(), "nope")

    def test_missing_values_skipped(self):
        t = small_table()
        t.add_row({"net_name": "n1", "board_serial": "B04", "skew_ps": None})
        groups = same_net_grouping(t, "skew_ps")
        assert len(groups["n1"]) == 3

    def test_duplicate_key_rejected(self):
        t = small_table()
        with pytest.raises(ValueError, match="duplicate"):
            t.add_row({"net_name": "n1", "board_serial": "B01", "skew_ps": 9.0})


class TestPortMapColumn:
    HEADER = HEADER.rstrip() + ",port_map\n"

    def write(self, tmp_path, port_map):
        (tmp_path / "a.s4p").write_text("")
        path = tmp_path / "manifest.csv"
        path.write_text(self.HEADER + f"n1,B01,0,5.0,5.0,auto,a.s4p,{port_map}\n")
        return path

    def test_optional_column_parsed(self, tmp_path):
        records = load_manifest(self.write(tmp_path, "3-4-1-2"))
        assert records[0].port_map == (3, 4, 1, 2)

    def test_empty_cell_means_default(self, tmp_path):
        records = load_manifest(self.write(tmp_path, ""))
        assert records[0].port_map is None

    def test_bad_permutation(self, tmp_path):
        with pytest.raises(ManifestError, match="permutation"):
            load_manifest(self.write(tmp_path, "1-1-2-3"))

    def test_non_integer(self, tmp_path):
        with pytest.raises(ManifestError, match="dash-separated"):
            load_manifest(self.write(tmp_path, "a-b-c-d"))
