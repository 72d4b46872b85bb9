import numpy as np
import pytest

from qdsqueeze.errors import ConfigError, IntegrationError, TruncationError
from qdsqueeze.model import HBAR, SqueezeParams, SystemParams, build_nonhermitian
from qdsqueeze.reduced import (initial_amplitudes, oracle_full_vs_reduced, project_hamiltonian,
                               propagate_reduced, reduced_basis, run_reduced)

P = SystemParams(n_ph=4, n_pl=3)


def _matrix(params, mismatch=False):
    basis = reduced_basis(params.space, mismatch)
    return basis, project_hamiltonian(build_nonhermitian(params), basis)


def test_basis_orthonormal():
    for mismatch, size in ((False, 6), (True, 8)):
        b = reduced_basis(P.space, mismatch)
        assert b.size == size
        assert np.abs(b.kets.conj().T @ b.kets - np.eye(size)).max() < 1e-15
    assert reduced_basis(P.space).labels[4] == "|1,1,0,0>"


def test_basis_rejects_bad_space():
    with pytest.raises(ConfigError):
        reduced_basis(P.replace(num_pn=2).space)
    with pytest.raises(TruncationError):
        reduced_basis(SystemParams(n_ph=2).space)


def test_projected_entries_by_ladder_algebra():
    g, gab = P.g_bc, P.g_ab
    ga, gb, gc = P.gamma_a, P.gamma_b, P.gamma_c
    _, M = _matrix(P)
    expected = np.array([
        [-1j * gc, 1j * gc, g, 0, 0, 0],
        [1j * gc, -1j * gc, -g, 0, 0, 0],
        [g, -g, -1j * (gb + gc), gab, 0, 0],
        [0, 0, gab, -1j * (ga + gc), np.sqrt(2) * g, 0],
        [0, 0, 0, np.sqrt(2) * g, -1j * (ga + gb), np.sqrt(2) * gab],
        [0, 0, 0, 0, np.sqrt(2) * gab, -2j * ga],
    ])
    assert np.abs(M - expected).max() < 1e-12


def test_antisymmetric_kets_decouple():
    _, M = _matrix(P, mismatch=True)
    assert np.all(M[6:, :6] == 0) and np.all(M[:6, 6:] == 0)


def test_mismatch_couplings():
    p = P.replace(delta_gbc=30)
    _, M = _matrix(p, mismatch=True)
    g1, g2 = p.qd_couplings()
    assert np.isclose(M[0, 2], g1 - 15) and np.isclose(M[0, 2], 50)
    assert np.isclose(M[0, 6], (g1 - g2) / 2)
    assert np.isclose(M[1, 6], -(g1 - g2) / 2)


def test_initial_amplitudes():
    b = reduced_basis(P.space)
    a0 = initial_amplitudes(SqueezeParams(0.0), b)
    assert np.allclose(a0, [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0, 0, 0])
    a = initial_amplitudes(SqueezeParams(0.2), b)
    assert abs(a[5] - (-0.13818584316607538)) < 1e-12
    # two-term norm: P(0) + P(2) of the exact squeezed vacuum
    assert abs(np.vdot(a, a).real - (0.980327998 + 0.0190953273)) < 1e-8
    with pytest.raises(TruncationError):
        initial_amplitudes(SqueezeParams(0.35), b)


def test_rabi_between_two_photon_and_photon_plasmon():
    p = P.replace(gamma_a=0, gamma_b=0, gamma_c=0, g_bc=0)
    b, M = _matrix(p)
    a0 = np.zeros(6, dtype=complex)
    a0[5] = 1
    tr = propagate_reduced(a0, M, b, 40.0, 0.5)
    omega = np.sqrt(2) * p.g_ab / HBAR
    assert np.abs(np.abs(tr.amplitudes[:, 5]) ** 2 - np.cos(omega * tr.times) ** 2).max() < 1e-8
    assert np.abs(np.abs(tr.amplitudes[:, 4]) ** 2 - np.sin(omega * tr.times) ** 2).max() < 1e-8


def test_cascade_order_and_bell_transfer():
    tr = run_reduced(P, 200.0)
    amps = np.abs(tr.amplitudes) ** 2
    peaks = [tr.times[np.argmax(amps[:, k])] for k in (5, 4, 3, 2)]
    assert peaks == sorted(peaks) and peaks[0] == 0 and peaks[-1] > peaks[0]
    k = np.searchsorted(tr.times, 20.0)
    assert tr.bell_pops[k, 1] > tr.bell_pops[0, 1]
    assert tr.bell_pops[k, 0] < tr.bell_pops[0, 0]
    assert np.all(np.diff(tr.meta["norm"]) <= 1e-12)


def test_b4_stays_zero():
    b, M = _matrix(P, mismatch=True)
    tr = propagate_reduced(initial_amplitudes(P.squeeze, b), M, b, 200.0)
    assert np.all(tr.amplitudes[:, 6:] == 0)
    mis = run_reduced(P.replace(delta_gbc=30), 200.0)
    assert np.abs(mis.amplitudes[:, 6:]).max() > 1e-3


def test_norm_growth_rejected():
    b = reduced_basis(P.space)
    with pytest.raises(IntegrationError):
        propagate_reduced(np.ones(6) / np.sqrt(6), 5j * np.eye(6), b, 50.0)


def test_vacuum_input_has_no_concurrence():
    tr = run_reduced(P.replace(squeeze=SqueezeParams(0.0)), 100.0)
    assert np.abs(tr.concurrence).max() < 1e-12


def test_oracle_full_vs_reduced():
    base = oracle_full_vs_reduced(P, t_end=300.0)
    assert base.max_concurrence_deviation < 0.05
    assert base.max_pop_deviation > 0
    damped = oracle_full_vs_reduced(P.replace(gamma_b=1500.0), t_end=300.0)
    assert damped.max_pop_deviation < base.max_pop_deviation
    with pytest.raises(ConfigError):
        oracle_full_vs_reduced(P.replace(delta_gbc=10))
