"""Quick invariant and oracle checks, runnable from the command line."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .algebra import annihilation
from .lindblad import lindblad_rhs, propagate, simulate
from .model import SqueezeParams, SystemParams, build_dissipators, build_hamiltonian, \
    build_nonhermitian, excitation_number
from .observables import concurrence_mixed
from .reduced import initial_amplitudes, oracle_full_vs_reduced, project_hamiltonian, \
    propagate_reduced, reduced_basis
from .states import BELL, MAGIC, initial_state_pulse, squeezed_vacuum


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


def _le(name, value, limit):
    return Check(name, bool(value <= limit), float(value), limit)


def superoperator_oracle(rho0, H, dissipators, times):
    """Exponentiate the generator built column by column from ``lindblad_rhs``."""
    n = H.shape[0]
    G = np.empty((n * n, n * n), dtype=complex)
    for k in range(n * n):
        e = np.zeros(n * n, dtype=complex)
        e[k] = 1.0
        G[:, k] = lindblad_rhs(e.reshape(n, n), H, dissipators).ravel()
    return [(expm(G * t) @ rho0.ravel()).reshape(n, n) for t in times]


def run_checks() -> list[Check]:
    out = []
    p = SystemParams()
    H = build_hamiltonian(p)
    out.append(_le("Hamiltonian Hermiticity", np.abs(H - H.conj().T).max(), 1e-12))
    N = excitation_number(p.space)
    H0 = build_hamiltonian(p, include_drive=False)
    out.append(_le("undriven excitation conservation", np.abs(H0 @ N - N @ H0).max(), 1e-10))
    parity = np.diag(np.where(np.round(np.diag(N).real) % 2 == 0, 1.0, -1.0))
    out.append(_le("driven parity conservation", np.abs(H @ parity - parity @ H).max(), 1e-10))

    out.append(_le("Bell basis orthonormality", np.abs(BELL @ BELL.conj().T - np.eye(4)).max(), 1e-14))
    out.append(_le("magic basis orthonormality", np.abs(MAGIC @ MAGIC.conj().T - np.eye(4)).max(), 1e-14))

    probs = squeezed_vacuum(SqueezeParams(0.2), 12).probabilities
    a = annihilation(40)
    ref = np.abs(expm(0.1 * (a @ a - a.T @ a.T))[:12, 0]) ** 2  # S(0.2) acting on |0>
    out.append(_le("squeezed spectrum vs squeeze-operator exponential", np.abs(probs - ref).max(), 1e-4))

    werner = 0.5 * np.outer(BELL[3], BELL[3].conj()) + 0.5 * np.eye(4) / 4
    out.append(_le("Werner p=0.5 concurrence", abs(concurrence_mixed(werner) - 0.25), 1e-8))

    small = SystemParams(n_ph=3, n_pl=2)
    Hs = build_hamiltonian(small)
    ds = build_dissipators(small)
    rho0 = initial_state_pulse(small)  # drive stays on in Hs
    tr = propagate(rho0, Hs, ds, 200.0, 10.0, snapshot_every=10.0)
    dev = 0.0
    for t, ref in zip((10.0, 50.0, 200.0), superoperator_oracle(rho0, Hs, ds, (10.0, 50.0, 200.0))):
        dev = max(dev, np.abs(tr.state_at(t) - ref).max())
    out.append(_le("Lindblad vs superoperator exponential", dev, 1e-6))

    rho = initial_state_pulse(p.replace(n_ph=4))
    rhs = lindblad_rhs(rho, build_hamiltonian(p.replace(n_ph=4)), build_dissipators(p.replace(n_ph=4)))
    out.append(_le("generator trace preservation", abs(np.trace(rhs)), 1e-12))

    basis = reduced_basis(p.space, mismatch=True)
    M = project_hamiltonian(build_nonhermitian(p), basis)
    red = propagate_reduced(initial_amplitudes(p.squeeze, basis), M, basis, 300.0)
    out.append(_le("B4 amplitudes stay zero at symmetric coupling", np.abs(red.amplitudes[:, 6:]).max(), 0.0))
    rep = oracle_full_vs_reduced(p, t_end=300.0)
    out.append(_le("reduced vs full non-Hermitian concurrence", rep.max_concurrence_deviation, 0.05))

    pulse = simulate(p.replace(n_ph=6), "pulse", 200.0)
    out.append(_le("pulse trace drift", pulse.trace_err.max(), 1e-8))
    out.append(_le("pulse negative eigenvalue", max(0.0, -np.nanmin(pulse.min_eig)), 1e-7))
    return out
