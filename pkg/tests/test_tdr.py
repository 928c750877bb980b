import numpy as np
import pytest

from conftest import clean_spec
from sivar import synth, tdr
from sivar.sparams import to_mixed_mode


def uniform_line_sdd11(z_diff, length_in, grid, loss=False):
    spec = clean_spec(
        z_odd_nom_ohm=z_diff / 2,
        loss_skin_db_in=2.846e-6 if loss else 0.0,
        loss_diel_db_in=6e-11 if loss else 0.0,
    )
    tau = length_in * spec.delay_per_inch_s
    params = synth.NetParams(
        z_odd_ohm=z_diff / 2, tau_p_s=tau, tau_n_s=tau, len_p_in=length_in,
        len_n_in=length_in, alpha_scale=1.0 if loss else 0.0,
        designed_skew_ps=0.0, random_skew_ps=0.0,
    )
    mm = to_mixed_mode(synth.net_model(params, grid, spec))
    return mm.freqs_hz, mm.sdd[:, 0, 0]


@pytest.fixture(scope="module")
def grid():
    return synth.default_grid(synth.PopulationSpec())


class TestStepResponse:
    def test_zero_reflection(self, grid):
        trace = tdr.step_response(grid, np.zeros(grid.size, dtype=complex))
        assert np.abs(trace.rho).max() < 1e-12
        assert np.abs(trace.z_ohm - 100.0).max() < 1e-9
        assert trace.time_s[0] == 0.0
        assert trace.dt_s <= 10e-12
        assert trace.time_s[-1] >= 10e-9

    def test_uniform_line_plateau(self, grid):
        freqs, sdd11 = uniform_line_sdd11(110.0, 25.0, grid)
        trace = tdr.step_response(freqs, sdd11)
        sel = (trace.time_s > 1e-9) & (trace.time_s < 3e-9)
        gamma = 10.0 / 210.0
        assert np.abs(trace.rho[sel] - gamma).max() < 0.002
        assert abs(np.mean(trace.z_ohm[sel]) - 110.0) < 0.5

    def test_rho_bilinear_map(self, grid):
        freqs, sdd11 = uniform_line_sdd11(120.0, 20.0, grid)
        trace = tdr.step_response(freqs, sdd11)
        recon = trace.z_ref_diff_ohm * (1 + trace.rho) / (1 - trace.rho)
        assert np.abs(recon - trace.z_ohm).max() < 1e-9

    def test_passive_rho_bound(self, grid):
        freqs, sdd11 = uniform_line_sdd11(90.0, 25.0, grid, loss=True)
        trace = tdr.step_response(freqs, sdd11)
        assert np.abs(trace.rho).max() < 1.0 + 1e-3

    def test_shunt_via_dip_location(self, grid):
        # Matched line with a single shunt-C discontinuity at one-way t0:
        # the reflection dip arrives at the round trip 2*t0.
        t0 = 2.0e-9
        c = 0.5e-12
        z0 = 50.0
        # ABCD chain (test-side oracle): line(t0) - shunt C - line(t0)
        w = 2j * np.pi * grid
        phase = np.exp(-w * t0)
        y = w * c
        # S11 of line-via-line with matched lines: reflection from C only,
        # delayed by the round trip.
        gamma_c = -y * z0 / 2 / (1 + y * z0 / 2)
        s11 = gamma_c * phase**2
        trace = tdr.step_response(grid, s11, z_ref_diff_ohm=100.0)
        dip = trace.time_s[np.argmin(trace.rho)]
        assert dip == pytest.approx(2 * t0, abs=trace.dt_s + 30e-12)
        assert trace.rho[np.argmin(trace.rho)] < 0

    def test_early_grid_warning(self):
        freqs = np.linspace(100e6, 6e9, 60)
        with pytest.warns(UserWarning, match="DC extrapolation"):
            tdr.step_response(freqs, np.zeros(60, dtype=complex))

    def test_nonuniform_grid_warns_not_errors(self):
        freqs = np.concatenate([np.arange(1, 100) * 10e6, 1e9 + np.arange(1, 100) * 50e6])
        vals = np.full(freqs.size, 0.05 + 0j)
        with pytest.warns(UserWarning, match="resampling"):
            trace = tdr.step_response(freqs, vals)
        assert np.isfinite(trace.rho).all()


class TestWindowedImpedance:
    def test_matched(self, grid):
        trace = tdr.step_response(grid, np.zeros(grid.size, dtype=complex))
        assert tdr.windowed_impedance(trace, 0.2e-9) == pytest.approx(50.0, abs=1e-9)

    def test_line_110(self, grid):
        freqs, sdd11 = uniform_line_sdd11(110.0, 25.0, grid)
        trace = tdr.step_response(freqs, sdd11)
        t0 = tdr.find_settle_time(trace)
        assert tdr.windowed_impedance(trace, t0) == pytest.approx(55.0, abs=0.5)

    def test_via_loaded_line_after_settle(self, grid):
        spec = synth.PopulationSpec(via_pf=0.3, z_odd_nom_ohm=55.0,
                                    loss_skin_db_in=0.0, loss_diel_db_in=0.0)
        tau = 25.0 * spec.delay_per_inch_s
        params = synth.NetParams(
            z_odd_ohm=55.0, tau_p_s=tau, tau_n_s=tau, len_p_in=25.0, len_n_in=25.0,
            alpha_scale=0.0, designed_skew_ps=0.0, random_skew_ps=0.0,
        )
        mm = to_mixed_mode(synth.net_model(params, spec=spec, grid=grid))
        trace = tdr.step_response(mm.freqs_hz, mm.sdd[:, 0, 0])
        t0 = tdr.find_settle_time(trace)
        assert tdr.windowed_impedance(trace, t0) == pytest.approx(55.0, abs=0.5)

    def test_monotone_in_true_impedance(self, grid):
        got = []
        for z_diff in (90.0, 100.0, 110.0, 120.0):
            freqs, sdd11 = uniform_line_sdd11(z_diff, 25.0, grid)
            trace = tdr.step_response(freqs, sdd11)
            got.append(tdr.windowed_impedance(trace, tdr.find_settle_time(trace)))
        assert all(b > a for a, b in zip(got, got[1:]))
        for value, z_diff in zip(got, (90.0, 100.0, 110.0, 120.0)):
            assert value == pytest.approx(z_diff / 2, abs=0.5)

    def test_grid_density_stability(self):
        base = synth.default_grid(synth.PopulationSpec())
        dense = synth.default_grid(synth.PopulationSpec(f_step_hz=5e6))
        vals = []
        for grid in (base, dense):
            freqs, sdd11 = uniform_line_sdd11(110.0, 25.0, grid)
            trace = tdr.step_response(freqs, sdd11)
            vals.append(tdr.windowed_impedance(trace, 0.5e-9))
        assert abs(vals[0] - vals[1]) < 0.1

    def test_window_shift_robustness(self, grid):
        freqs, sdd11 = uniform_line_sdd11(110.0, 30.0, grid)
        trace = tdr.step_response(freqs, sdd11)
        t0 = tdr.find_settle_time(trace) + 0.3e-9
        base = tdr.windowed_impedance(trace, t0)
        for shift in (-0.2e-9, 0.2e-9):
            assert abs(tdr.windowed_impedance(trace, t0 + shift) - base) < 0.2

    def test_window_exceeds_span(self, grid):
        trace = tdr.step_response(grid, np.zeros(grid.size, dtype=complex))
        with pytest.raises(ValueError, match="exceeds trace span"):
            tdr.windowed_impedance(trace, trace.time_s[-1] - 1e-9, 2e-9)


class TestSettle:
    def test_settles_after_via_transient(self, grid):
        spec = synth.PopulationSpec(via_pf=0.4, z_odd_nom_ohm=52.4)
        tau = 20.0 * spec.delay_per_inch_s
        params = synth.NetParams(
            z_odd_ohm=52.4, tau_p_s=tau, tau_n_s=tau, len_p_in=20.0, len_n_in=20.0,
            alpha_scale=1.0, designed_skew_ps=0.0, random_skew_ps=0.0,
        )
        mm = to_mixed_mode(synth.net_model(params, grid, spec))
        trace = tdr.step_response(mm.freqs_hz, mm.sdd[:, 0, 0])
        t0 = tdr.find_settle_time(trace)
        assert 0.0 < t0 < 5e-9

    def test_short_trace_error(self):
        trace = tdr.TdrTrace(
            time_s=np.arange(5) * 5e-12, rho=np.zeros(5), z_ohm=np.full(5, 100.0),
            z_ref_diff_ohm=100.0,
        )
        with pytest.raises(ValueError, match="shorter than the settle hold"):
            tdr.find_settle_time(trace)

    def test_never_settles_error(self):
        n = 400
        time = np.arange(n) * 5e-12
        z = 100.0 + np.cumsum(np.full(n, 0.1))  # 20 ohm/ns ramp
        trace = tdr.TdrTrace(time_s=time, rho=np.zeros(n), z_ohm=z, z_ref_diff_ohm=100.0)
        with pytest.raises(ValueError, match="never settles"):
            tdr.find_settle_time(trace)


def test_trace_csv_export(tmp_path, grid):
    freqs, sdd11 = uniform_line_sdd11(110.0, 10.0, grid)
    trace = tdr.step_response(freqs, sdd11)
    path = tmp_path / "trace.csv"
    tdr.trace_to_csv(trace, path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.shape[0] == trace.time_s.size
    assert abs(data["z_ohm"][100] - trace.z_ohm[100]) < 1e-6
