"""Shared builders for synthetic networks used across the suite."""

import numpy as np
import pytest

from sivar import synth
from sivar.sparams import NetworkData, TwoPort


def clean_spec(**overrides) -> synth.PopulationSpec:
    """A generator spec with no vias, no loss, and a matched 50-ohm line."""
    base = dict(via_pf=0.0, loss_skin_db_in=0.0, loss_diel_db_in=0.0, z_odd_nom_ohm=50.0)
    base.update(overrides)
    return synth.PopulationSpec(**base)


def delay_pair(grid, tau_p_s, tau_n_s, spec=None, z_odd=None, alpha_scale=0.0):
    """4-port network of two uncoupled delay lines (P and N)."""
    spec = spec or clean_spec()
    params = synth.NetParams(
        z_odd_ohm=z_odd if z_odd is not None else spec.z_odd_nom_ohm,
        tau_p_s=tau_p_s,
        tau_n_s=tau_n_s,
        len_p_in=10.0,
        len_n_in=10.0,
        alpha_scale=alpha_scale,
        designed_skew_ps=0.0,
        random_skew_ps=0.0,
    )
    return synth.net_model(params, grid, spec)


def random_passive_s4(rng, nfreq: int) -> np.ndarray:
    """Random passive 4x4 S-matrices (largest singular value <= 0.9)."""
    raw = rng.normal(size=(nfreq, 4, 4)) + 1j * rng.normal(size=(nfreq, 4, 4))
    u, s, vh = np.linalg.svd(raw)
    s = 0.9 * s / s[:, :1]
    return u @ (s[..., None] * vh)


def random_passive_network(rng, nfreq: int = 16) -> NetworkData:
    freqs = 1e8 * np.arange(1, nfreq + 1)
    return NetworkData(freqs_hz=freqs, s=random_passive_s4(rng, nfreq))


def random_smooth_twoport(rng, freqs, z_ref=100.0) -> TwoPort:
    """Random well-behaved differential channel: delay, loss, mild ripple."""
    freqs = np.asarray(freqs, dtype=float)
    tau = rng.uniform(0.3e-9, 4e-9)
    k_loss = rng.uniform(0.0, 3e-10)
    ripple = rng.uniform(0.0, 0.08)
    f_rip = rng.uniform(0.5e9, 2e9)
    mag = np.exp(-k_loss * np.sqrt(freqs)) * (1.0 - ripple * np.sin(freqs / f_rip) ** 2)
    s21 = mag * np.exp(-2j * np.pi * freqs * tau)
    s11 = ripple * 0.5 * np.exp(-2j * np.pi * freqs * tau * 0.3)
    s = np.zeros((freqs.size, 2, 2), dtype=complex)
    s[:, 1, 0] = s21
    s[:, 0, 1] = s21
    s[:, 0, 0] = s11
    s[:, 1, 1] = s11
    return TwoPort(freqs, s, z_ref)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture(scope="session")
def default_grid():
    return synth.default_grid(synth.PopulationSpec())


@pytest.fixture(scope="session")
def nyq_grid():
    """Grid whose top frequency is an exact Nyquist for 12.5 ps sim steps."""
    return 10e6 * np.arange(1, 801)
