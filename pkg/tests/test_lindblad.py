import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qdsqueeze.errors import ConvergenceError, IntegrationError
from qdsqueeze.lindblad import (Trajectory, convergence_check, detect_steady_state, lindblad_rhs,
                                liouvillian, propagate, reachable_indices, simulate, steady_state)
from qdsqueeze.model import (HBAR, DissipatorSpec, SqueezeParams, SystemParams, build_dissipators,
                             build_hamiltonian, excitation_number)
from qdsqueeze.states import initial_state_ground, initial_state_pulse

SMALL = SystemParams(n_ph=3, n_pl=2)


def column_stacked_generator(H, dissipators):
    """vec(A X B) = (B^T kron A) vec(X) with column-major vec."""
    n = H.shape[0]
    I = np.eye(n)
    G = -1j * (np.kron(I, H) - np.kron(H.T, I))
    for d in dissipators:
        x, g = d.operator, d.rate
        xdx = x.conj().T @ x
        G = G + g * (np.kron(x.conj(), x) - 0.5 * np.kron(I, xdx) - 0.5 * np.kron(xdx.T, I))
    return G / HBAR


def random_density(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def test_rhs_zero_generator():
    rho = random_density(np.random.default_rng(0), 8)
    assert np.count_nonzero(lindblad_rhs(rho, np.zeros((8, 8)), [])) == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rhs_trace_free_and_matches_liouvillian(seed):
    rng = np.random.default_rng(seed)
    H = build_hamiltonian(SMALL)
    ds = build_dissipators(SMALL)
    rho = random_density(rng, H.shape[0])
    drho = lindblad_rhs(rho, H, ds)
    assert abs(np.trace(drho)) < 1e-12
    assert np.allclose(liouvillian(H, ds) @ rho.ravel(), drho.ravel(), atol=1e-14)


def test_two_level_decay():
    a = np.array([[0, 1], [0, 0]], dtype=complex)
    gamma = 20.0
    H = np.zeros((4, 4))
    d = [DissipatorSpec(np.kron(a, np.eye(2)), gamma)]
    rho = np.zeros((4, 4), dtype=complex)
    rho[2, 2] = 1
    assert np.isclose(lindblad_rhs(rho, H, d)[2, 2], -gamma / HBAR)
    tr = propagate(rho, H, d, 100.0, 1.0, snapshot_every=1.0)
    pop = np.array([s[2, 2].real for s in tr.snapshots])
    assert np.abs(pop - np.exp(-gamma * tr.snapshot_times / HBAR)).max() < 1e-8


def test_matches_expm_oracle():
    H = build_hamiltonian(SMALL)
    ds = build_dissipators(SMALL)
    rho0 = initial_state_pulse(SMALL)
    n = H.shape[0]
    G = column_stacked_generator(H, ds)
    tr = propagate(rho0, H, ds, 200.0, 10.0, snapshot_every=10.0)
    for t in (10.0, 50.0, 200.0):
        ref = (expm(G * t) @ rho0.ravel(order="F")).reshape((n, n), order="F")
        assert np.abs(tr.state_at(t) - ref).max() <= 1e-6


def test_unitary_purity_and_reversibility():
    p = SMALL.replace(gamma_a=0, gamma_b=0, gamma_c=0)
    H = build_hamiltonian(p)
    rho0 = initial_state_pulse(p)
    fwd = propagate(rho0, H, [], 200.0, 5.0, snapshot_every=5.0)
    purity = [np.trace(s @ s).real for s in fwd.snapshots]
    assert np.abs(np.array(purity) - 1).max() <= 1e-8
    back = propagate(fwd.snapshots[-1], -H, [], 200.0, 200.0, snapshot_every=200.0)
    assert np.abs(back.snapshots[-1] - rho0).max() <= 1e-6


def test_sector_populations_constant_without_loss_or_drive():
    p = SMALL.replace(gamma_a=0, gamma_b=0, gamma_c=0)
    H = build_hamiltonian(p, include_drive=False)
    N = np.round(np.diag(excitation_number(p.space)).real).astype(int)
    rho0 = initial_state_pulse(p)
    tr = propagate(rho0, H, [], 150.0, 5.0, snapshot_every=5.0)
    sectors0 = np.bincount(N, weights=np.diag(rho0).real)
    for s in tr.snapshots:
        assert np.abs(np.bincount(N, weights=np.diag(s).real) - sectors0).max() <= 1e-8


def test_parity_restriction():
    p = SystemParams()
    L = liouvillian(build_hamiltonian(p), build_dissipators(p))
    active = reachable_indices(L, np.array([0]))
    assert len(active) == 96 * 96 // 2


def test_trajectory_invariants_pump():
    tr = simulate(SystemParams(), "pump", 300.0)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.bell_pops.min() >= 0 and tr.bell_pops.max() <= 1 + 1e-8
    assert tr.concurrence.min() >= 0 and tr.concurrence.max() <= 1 + 1e-8
    assert tr.trace_err.max() <= 1e-8 and tr.herm_err.max() <= 1e-10
    assert np.nanmin(tr.min_eig) >= -1e-7
    assert tr.photon_number.max() < 1


def test_strided_min_eig():
    tr = simulate(SMALL, "pump", 50.0, min_eig_stride=10)
    assert np.isnan(tr.min_eig[1]) and not np.isnan(tr.min_eig[10]) and not np.isnan(tr.min_eig[-1])


def test_quality_gate_raises():
    # a loose integrator on a strongly driven system breaks the positivity gate
    p = SMALL.replace(epsilon=200.0)
    with pytest.raises(IntegrationError) as exc:
        simulate(p, "pump", 200.0, rtol=1e-1, atol=1e-1, retry=False)
    assert exc.value.diagnostics


def test_gate_failure_retried_with_tighter_tolerances():
    # weak coupling and drive: min eigenvalue dips to -1.04e-7 at the default tolerances
    p = SystemParams(g_ab=20 / 3, epsilon=25 / 30)
    with pytest.raises(IntegrationError):
        simulate(p, "pump", 250.0, dt_out=10.0, retry=False)
    tr = simulate(p, "pump", 250.0, dt_out=10.0)
    assert tr.meta["retried"]["rtol"] == 1e-12
    assert tr.min_eig.min() >= -1e-9


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        propagate(np.eye(12) / 12, np.zeros((12, 12)), [], -1.0)
    rho = np.zeros((12, 12), dtype=complex)
    rho[0, 1] = 1
    with pytest.raises(ValueError):
        propagate(rho, np.zeros((12, 12)), [], 10.0)


def test_steady_state_undriven_is_vacuum():
    p = SMALL
    H = build_hamiltonian(p, include_drive=False)
    rho = steady_state(H, build_dissipators(p), initial_state_pulse(p))
    assert abs(rho[0, 0] - 1) < 1e-10
    # the QD singlet only leaves through dephasing, so relaxation takes ~10 ps
    tr = simulate(p, "pulse", 15000.0, dt_out=50.0, snapshot_every=50.0)
    t, rho_t = detect_steady_state(tr, window=100.0, tol=1e-6)
    assert t < 15000.0 and abs(rho_t[0, 0] - 1) < 1e-6


def test_detect_steady_state_none_when_moving():
    tr = simulate(SMALL, "pump", 100.0, snapshot_every=1.0)
    assert detect_steady_state(tr, window=100.0) is None
    with pytest.raises(ValueError):
        detect_steady_state(simulate(SMALL, "pump", 10.0))


def test_steady_state_matches_long_run():
    p = SMALL.replace(gamma_a=100.0)
    rho_ss = steady_state(build_hamiltonian(p), build_dissipators(p))
    # slowest generator mode decays in ~760 fs
    tr = simulate(p, "pump", 12000.0, dt_out=100.0, snapshot_every=100.0)
    assert np.abs(tr.snapshots[-1] - rho_ss).max() < 1e-6


def test_convergence_check_vacuum():
    rep = convergence_check(SMALL.replace(epsilon=0.0), 100.0)
    assert rep.deviations == {"n_ph": 0.0, "n_pl": 0.0} and rep.converged


def test_convergence_check_pulse():
    rep = convergence_check(SystemParams(n_ph=6), 300.0, mode="pulse")
    assert rep.converged and rep.deviations["n_ph"] < 1e-3


def test_convergence_failure_names_dimension():
    with pytest.raises(ConvergenceError) as exc:
        convergence_check(SystemParams(n_ph=4, epsilon=25.0), 200.0)
    assert "n_ph" in str(exc.value) and "n_ph" in exc.value.report.offending


def test_csv_roundtrip(tmp_path):
    tr = simulate(SMALL.replace(squeeze=SqueezeParams(0.1)), "pulse", 20.0)
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert data.dtype.names == Trajectory.CSV_COLUMNS
    assert np.allclose(data["concurrence"], tr.concurrence, atol=1e-12)
    assert len(data) == 41


def test_ground_state_pump_starts_unentangled():
    tr = simulate(SMALL, "pump", 5.0)
    assert tr.concurrence[0] == 0 and np.allclose(tr.bell_pops[0], [0.5, 0.5, 0, 0])
    assert np.array_equal(initial_state_ground(SMALL.space)[0, 0], 1)
