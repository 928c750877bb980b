import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import clean_spec, delay_pair, random_passive_network, random_passive_s4
from sivar import synth
from sivar.sparams import (
    CascadeError,
    NetworkData,
    TouchstoneError,
    TwoPort,
    cascade_diff,
    ideal_delay_twoport,
    ideal_through,
    parse_touchstone,
    to_mixed_mode,
    write_touchstone,
)

ZERO_FILE = "! empty network\n# GHz S RI R 50\n1.0 " + " ".join(["0 0"] * 4) + "\n" + (
    "\n".join(" ".join(["0 0"] * 4) for _ in range(3))
) + "\n"


class TestParse:
    def test_single_frequency_zero_matrix(self):
        net = parse_touchstone(ZERO_FILE)
        assert net.freqs_hz.shape == (1,)
        assert net.freqs_hz[0] == 1e9
        assert np.all(net.s == 0)
        assert net.z_ref_ohm == 50.0

    def test_ma_hand_conversion(self):
        # mag=1 ang=-90 at position S11 -> 0 - 1j
        rows = ["1.0 1 -90 " + " ".join(["0 0"] * 3)] + [" ".join(["0 0"] * 4)] * 3
        text = "# GHz S MA R 50\n" + "\n".join(rows) + "\n"
        net = parse_touchstone(text)
        assert net.s[0, 0, 0] == pytest.approx(0.0 - 1.0j, abs=1e-15)

    def test_db_conversion(self):
        rows = ["2.0 -6.0205999 0 " + " ".join(["0 0"] * 3)] + [" ".join(["0 0"] * 4)] * 3
        net = parse_touchstone("# GHz S DB R 50\n" + "\n".join(rows) + "\n")
        assert abs(net.s[0, 0, 0]) == pytest.approx(0.5, abs=1e-7)

    def test_non_monotone_frequency(self):
        block = "\n".join([" ".join(["0 0"] * 4)] * 3)
        text = "# GHz S RI R 50\n1.0 " + " ".join(["0 0"] * 4) + "\n" + block
        text += "\n0.5 " + " ".join(["0 0"] * 4) + "\n" + block + "\n"
        with pytest.raises(TouchstoneError, match="non-monotone frequency"):
            parse_touchstone(text)

    def test_truncated_block(self):
        text = "# GHz S RI R 50\n1.0 0 0 0 0\n"
        with pytest.raises(TouchstoneError, match="truncated matrix block"):
            parse_touchstone(text)

    def test_v2_rejected(self):
        with pytest.raises(TouchstoneError, match="v1 only"):
            parse_touchstone("[Version] 2.0\n# GHz S RI R 50\n")

    def test_malformed_option_line(self):
        with pytest.raises(TouchstoneError, match="line 1"):
            parse_touchstone("# GHz X RI R 50\n")

    def test_data_before_option_line(self):
        with pytest.raises(TouchstoneError, match="data before option line"):
            parse_touchstone("1.0 0 0\n# GHz S RI R 50\n")

    def test_non_numeric_token(self):
        with pytest.raises(TouchstoneError, match="non-numeric"):
            parse_touchstone("# GHz S RI R 50\n1.0 zero 0\n")

    def test_units_and_comments(self):
        rows = ["1000.0 0.5 0 " + " ".join(["0 0"] * 3) + " ! inline"] + [
            " ".join(["0 0"] * 4) for _ in range(3)
        ]
        net = parse_touchstone("! lead\n# MHz S RI R 75\n" + "\n".join(rows) + "\n")
        assert net.freqs_hz[0] == 1e9
        assert net.z_ref_ohm == 75.0

    def test_impedance_mismatch_warns(self):
        with pytest.warns(UserWarning, match="differs from expected"):
            parse_touchstone(ZERO_FILE.replace("R 50", "R 42"), expect_z_ref=50.0)


class TestRoundtrip:
    def test_zero_roundtrip(self):
        net = parse_touchstone(ZERO_FILE)
        again = parse_touchstone(write_touchstone(net, "RI"))
        assert np.array_equal(again.s, net.s)
        assert np.array_equal(again.freqs_hz, net.freqs_hz)

    @pytest.mark.parametrize("fmt,tol", [("RI", 1e-9), ("MA", 1e-7), ("DB", 1e-7)])
    def test_random_passive_roundtrip(self, rng, fmt, tol):
        net = random_passive_network(rng)
        again = parse_touchstone(write_touchstone(net, fmt))
        assert np.abs(again.s - net.s).max() < tol
        assert np.abs(again.freqs_hz - net.freqs_hz).max() < 1e-6 * net.freqs_hz[0]

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), fmt=st.sampled_from(["RI", "MA", "DB"]))
    def test_roundtrip_property(self, seed, fmt):
        rng = np.random.default_rng(seed)
        net = NetworkData(freqs_hz=1e9 * np.arange(1, 5), s=random_passive_s4(rng, 4))
        again = parse_touchstone(write_touchstone(net, fmt))
        assert np.abs(again.s - net.s).max() < 1e-7

    def test_unsupported_format(self, rng):
        with pytest.raises(ValueError, match="unsupported format"):
            write_touchstone(random_passive_network(rng), "XX")

    def test_configurable_precision(self, rng):
        net = random_passive_network(rng)
        coarse = parse_touchstone(write_touchstone(net, "RI", precision=4))
        err = np.abs(coarse.s - net.s).max()
        assert 1e-9 < err < 1e-4


class TestMixedMode:
    def test_zero_network(self):
        net = NetworkData(freqs_hz=np.array([1e9, 2e9]), s=np.zeros((2, 4, 4)))
        mm = to_mixed_mode(net)
        for block in (mm.sdd, mm.sdc, mm.scd, mm.scc):
            assert np.all(block == 0)
        assert mm.z_ref_diff_ohm == 100.0
        assert mm.z_ref_comm_ohm == 25.0

    def test_identical_lossless_lines(self, default_grid):
        tau = 1.0e-9
        net = delay_pair(default_grid, tau, tau)
        mm = to_mixed_mode(net)
        expected = np.exp(-2j * np.pi * default_grid * tau)
        assert np.abs(mm.sdd[:, 1, 0] - expected).max() < 1e-12
        assert np.abs(mm.scd[:, 1, 0]).max() == 0.0

    def test_two_delay_closed_form(self, default_grid):
        tau_p, tau_n = 1.0e-9, 1.0e-9 + 37e-12
        mm = to_mixed_mode(delay_pair(default_grid, tau_p, tau_n))
        d = tau_p - tau_n
        assert np.abs(np.abs(mm.scd[:, 1, 0]) - np.abs(np.sin(np.pi * default_grid * d))).max() < 1e-12
        assert np.abs(np.abs(mm.sdd[:, 1, 0]) - np.abs(np.cos(np.pi * default_grid * d))).max() < 1e-12

    def test_energy_identity_lossless(self, default_grid):
        mm = to_mixed_mode(delay_pair(default_grid, 0.8e-9, 0.8e-9 + 56e-12))
        total = np.abs(mm.sdd[:, 1, 0]) ** 2 + np.abs(mm.scd[:, 1, 0]) ** 2
        assert np.abs(total - 1.0).max() < 1e-9

    def test_linearity(self, rng):
        freqs = 1e9 * np.arange(1, 4)
        s1 = random_passive_s4(rng, 3)
        s2 = random_passive_s4(rng, 3)
        a, b = 0.7, -1.3
        mm1 = to_mixed_mode(NetworkData(freqs_hz=freqs, s=s1))
        mm2 = to_mixed_mode(NetworkData(freqs_hz=freqs, s=s2))
        mm3 = to_mixed_mode(NetworkData(freqs_hz=freqs, s=a * s1 + b * s2))
        for blk in ("sdd", "sdc", "scd", "scc"):
            lhs = getattr(mm3, blk)
            rhs = a * getattr(mm1, blk) + b * getattr(mm2, blk)
            assert np.abs(lhs - rhs).max() < 1e-12

    def test_passivity_bound(self, rng):
        net = random_passive_network(rng)
        mm = to_mixed_mode(net)
        smm = np.block([[mm.sdd, mm.sdc], [mm.scd, mm.scc]])
        assert np.abs(smm).max() <= 1.0 + 1e-6

    def test_port_map_reorder(self, rng):
        net = random_passive_network(rng)
        # Swapping P and N pairs in the map must negate SDC/SCD blocks.
        swapped = NetworkData(
            freqs_hz=net.freqs_hz, s=net.s, z_ref_ohm=net.z_ref_ohm, port_map=(3, 4, 1, 2)
        )
        mm = to_mixed_mode(net)
        mm_swapped = to_mixed_mode(swapped)
        assert np.abs(mm_swapped.sdd - mm.sdd).max() < 1e-12
        assert np.abs(mm_swapped.scd + mm.scd).max() < 1e-12

    def test_apply_port_map_canonicalizes(self, rng):
        from sivar.sparams import apply_port_map

        net = random_passive_network(rng)
        remapped = NetworkData(
            freqs_hz=net.freqs_hz, s=net.s, z_ref_ohm=net.z_ref_ohm, port_map=(2, 1, 4, 3)
        )
        canon = apply_port_map(remapped)
        assert canon.port_map == (1, 2, 3, 4)
        assert canon.s[0, 0, 0] == net.s[0, 1, 1]
        assert to_mixed_mode(canon).sdd == pytest.approx(to_mixed_mode(remapped).sdd)
        assert apply_port_map(net) is net


def _abcd_series_z(freqs, z):
    one = np.ones(freqs.size, dtype=complex)
    return one, z * one, 0 * one, one


def _abcd_to_s2(a, b, c, d, z0):
    delta = a + b / z0 + c * z0 + d
    s = np.empty((a.size, 2, 2), dtype=complex)
    s[:, 0, 0] = (a + b / z0 - c * z0 - d) / delta
    s[:, 0, 1] = 2 * (a * d - b * c) / delta
    s[:, 1, 0] = 2 / delta
    s[:, 1, 1] = (-a + b / z0 - c * z0 + d) / delta
    return s


class TestCascade:
    def test_identity_element(self, rng):
        freqs = 1e9 * np.arange(1, 6)
        s = random_passive_s4(rng, 5)[:, :2, :2]
        block = TwoPort(freqs, s, 100.0)
        out = cascade_diff(block, ideal_through(freqs, 100.0))
        assert np.abs(out.s - block.s).max() < 1e-12
        out2 = cascade_diff(ideal_through(freqs, 100.0), block)
        assert np.abs(out2.s - block.s).max() < 1e-12

    def test_delay_additivity(self):
        freqs = 1e8 * np.arange(1, 60)
        t1, t2 = 0.7e-9, 1.9e-9
        out = cascade_diff(ideal_delay_twoport(freqs, t1), ideal_delay_twoport(freqs, t2))
        expected = ideal_delay_twoport(freqs, t1 + t2)
        assert np.abs(out.s - expected.s).max() < 1e-12

    def test_abcd_oracle_two_mismatched_sections(self):
        # Series impedance section, cascaded twice: ABCD chain is the oracle.
        freqs = 1e9 * np.arange(1, 11)
        z = 13.0 + 8.0j
        a, b, c, d = _abcd_series_z(freqs, z)
        s_one = _abcd_to_s2(a, b, c, d, 100.0)
        block = TwoPort(freqs, s_one, 100.0)
        got = cascade_diff(block, block)
        a2, b2, c2, d2 = _abcd_series_z(freqs, 2 * z)
        expected = _abcd_to_s2(a2, b2, c2, d2, 100.0)
        assert np.abs(got.s - expected).max() < 1e-9

    def test_associativity(self, rng):
        freqs = 1e9 * np.arange(1, 8)
        blocks = []
        for _ in range(3):
            s = random_passive_s4(rng, 7)[:, :2, :2]
            blocks.append(TwoPort(freqs, s, 100.0))
        left = cascade_diff(cascade_diff(blocks[0], blocks[1]), blocks[2])
        right = cascade_diff(blocks[0], cascade_diff(blocks[1], blocks[2]))
        assert np.abs(left.s - right.s).max() < 1e-8

    def test_grid_mismatch(self):
        a = ideal_through(1e9 * np.arange(1, 5))
        b = ideal_through(1e9 * np.arange(2, 6))
        with pytest.raises(CascadeError, match="grids differ"):
            cascade_diff(a, b)

    def test_singular_s21(self):
        freqs = 1e9 * np.arange(1, 4)
        s = np.zeros((3, 2, 2), dtype=complex)
        with pytest.raises(CascadeError, match="frequency index 0"):
            cascade_diff(TwoPort(freqs, s, 100.0), ideal_through(freqs))


class TestNetworkData:
    def test_invariants(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            NetworkData(freqs_hz=np.array([2e9, 1e9]), s=np.zeros((2, 4, 4)))
        with pytest.raises(ValueError, match="does not match"):
            NetworkData(freqs_hz=np.array([1e9, 2e9]), s=np.zeros((3, 4, 4)))
        with pytest.raises(ValueError, match="positive"):
            NetworkData(freqs_hz=np.array([1e9, 2e9]), s=np.zeros((2, 4, 4)), z_ref_ohm=0.0)
