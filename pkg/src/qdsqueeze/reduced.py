"""Non-Hermitian Schrodinger evolution in the two-excitation cascade basis.

The reduced matrix is always obtained by projecting the full non-Hermitian
Hamiltonian onto the basis kets, never written out by hand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import DOP853

from .algebra import CompositeSpace, basis_ket, tensor_ket
from .errors import ConfigError, IntegrationError, TruncationError
from .lindblad import ATOL, RTOL, Trajectory
from .model import HBAR, SqueezeParams, SystemParams, build_nonhermitian
from .observables import bell_populations, concurrence_pure, d_metric
from .states import BELL, LEAKAGE_TOL

NORM_GROWTH_TOL = 1e-8

# (n_a, n_b, QD label); QD label is a Bell index 0..3 or the string "00"
_SYMMETRIC = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 1, 2),
    (1, 0, 2),
    (1, 1, "00"),
    (2, 0, "00"),
]
_MISMATCH_EXTRA = [
    (0, 1, 3),
    (1, 0, 3),
]
_BELL_NAMES = ("B1", "B2", "B3", "B4")


def _label(entry) -> str:
    na, nb, q = entry
    return f"|{na},{nb},0,0>" if q == "00" else f"|{na},{nb},{_BELL_NAMES[q]}>"


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal full-space kets, stored as the columns of ``kets``."""

    space: CompositeSpace
    entries: tuple
    kets: np.ndarray

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(_label(e) for e in self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    def bell_index(self, k: int):
        q = self.entries[k][2]
        return None if q == "00" else q

    def embed(self, alpha: np.ndarray) -> np.ndarray:
        return self.kets @ alpha


def reduced_basis(space: CompositeSpace, mismatch: bool = False) -> ReducedBasis:
    """Six-ket cascade basis, or eight kets with the antisymmetric B4 states added."""
    if space.num_pn != 1:
        raise ConfigError("reduced basis is defined for a single plasmonic particle")
    n_ph, n_pl = space.dims[0], space.dims[1]
    if n_ph < 3 or n_pl < 2:
        raise TruncationError("reduced basis needs n_ph >= 3 and n_pl >= 2")
    entries = _SYMMETRIC + (_MISMATCH_EXTRA if mismatch else [])
    cols = []
    for na, nb, q in entries:
        qd = np.array([1, 0, 0, 0], dtype=complex) if q == "00" else BELL[q]
        cols.append(tensor_ket([basis_ket(n_ph, na), basis_ket(n_pl, nb), qd]))
    return ReducedBasis(space, tuple(entries), np.array(cols).T)


def project_hamiltonian(H_nh: np.ndarray, basis: ReducedBasis) -> np.ndarray:
    """M_kl = <basis_k| H_nh |basis_l>.

    Real and imaginary parts below 1e-12 of the largest entry are round-off
    from the Bell-ket sums and are set to exactly zero.
    """
    K = basis.kets
    M = K.conj().T @ H_nh @ K
    floor = 1e-12 * max(np.abs(M).max(), 1.0)
    re, im = M.real.copy(), M.imag.copy()
    re[np.abs(re) < floor] = 0.0
    im[np.abs(im) < floor] = 0.0
    return re + 1j * im


def eq2_leakage(sq: SqueezeParams) -> float:
    """Probability missing from the two-term (vacuum + two-photon) squeezed state."""
    return 1.0 - (1.0 + np.tanh(sq.r) ** 2 / 2) / np.cosh(sq.r)


def initial_amplitudes(sq: SqueezeParams, basis: ReducedBasis) -> np.ndarray:
    """Two-term squeezed vacuum with the vacuum split evenly over |0,0,B1> and |0,0,B2>.

    The two-term state is not renormalized: its norm is 1 - leakage.
    """
    leak = eq2_leakage(sq)
    if leak > LEAKAGE_TOL:
        raise TruncationError(
            f"two-term squeezed state with r={sq.r} misses {leak:.2e} of the norm"
        )
    root = np.sqrt(np.cosh(sq.r))
    alpha = np.zeros(basis.size, dtype=complex)
    vac = 1 / (np.sqrt(2) * root)
    alpha[basis.entries.index((0, 0, 0))] = vac
    alpha[basis.entries.index((0, 0, 1))] = vac
    alpha[basis.entries.index((2, 0, "00"))] = -np.exp(1j * sq.theta) * np.tanh(sq.r) / (np.sqrt(2) * root)
    return alpha


def reduced_observables(alpha: np.ndarray, basis: ReducedBasis):
    """Bell populations (absolute, not renormalized), D and concurrence."""
    pops = np.zeros(4)
    for k, entry in enumerate(basis.entries):
        q = basis.bell_index(k)
        if q is None:
            continue
        na, nb, _ = entry
        if q in (0, 1) and (na, nb) != (0, 0):
            continue
        pops[q] += abs(alpha[k]) ** 2
    blocks = _qd_blocks(alpha, basis)
    return pops, d_metric(pops), concurrence_pure(blocks)


def _qd_blocks(alpha, basis):
    """Per-(n_a, n_b) two-QD kets in the product basis."""
    out = {}
    for k, (na, nb, q) in enumerate(basis.entries):
        qd = np.array([1, 0, 0, 0], dtype=complex) if q == "00" else BELL[q]
        out.setdefault((na, nb), np.zeros(4, dtype=complex))
        out[(na, nb)] = out[(na, nb)] + alpha[k] * qd
    return np.array(list(out.values()))


def propagate_reduced(alpha0: np.ndarray, M: np.ndarray, basis: ReducedBasis,
                      t_end: float, dt_out: float = 0.5, *,
                      rtol: float = RTOL, atol: float = ATOL) -> Trajectory:
    """Solve i hbar d(alpha)/dt = M alpha; populations keep the decaying norm."""
    alpha0 = np.asarray(alpha0, dtype=complex)
    gen = -1j * np.asarray(M) / HBAR
    times = np.arange(0.0, t_end + 0.5 * dt_out, dt_out)
    times = times[times <= t_end + 1e-9]
    T = len(times)
    amps = np.empty((T, basis.size), dtype=complex)
    amps[0] = alpha0
    solver = DOP853(lambda t, y: gen @ y, 0.0, alpha0, float(times[-1]), rtol=rtol, atol=atol)
    k = 1
    while k < T:
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"reduced integration failed at t={solver.t:.3f} fs: {msg}")
        interp = None
        while k < T and times[k] <= solver.t:
            if times[k] == solver.t:
                amps[k] = solver.y
            else:
                if interp is None:
                    interp = solver.dense_output()
                amps[k] = interp(times[k])
            k += 1
    norms = np.sum(np.abs(amps) ** 2, axis=1)
    growth = np.max(np.diff(norms)) if T > 1 else 0.0
    if growth > NORM_GROWTH_TOL:
        raise IntegrationError(f"norm increased by {growth:.2e}", {"norm_growth": growth})

    pops = np.empty((T, 4))
    dm = np.empty(T)
    conc = np.empty(T)
    for j in range(T):
        pops[j], dm[j], conc[j] = reduced_observables(amps[j], basis)
    return Trajectory(
        times=times,
        bell_pops=pops,
        d_metric=dm,
        concurrence=conc,
        trace_err=np.abs(norms - norms[0]),
        min_eig=np.zeros(T),
        amplitudes=amps,
        labels=basis.labels,
        meta={"model": "non-hermitian reduced", "norm": norms, "rtol": rtol, "atol": atol,
              "dt_out_fs": dt_out, "t_end_fs": float(times[-1])},
    )


def run_reduced(params: SystemParams, t_end: float = 500.0, dt_out: float = 0.5,
                mismatch: bool | None = None) -> Trajectory:
    if mismatch is None:
        mismatch = params.delta_gbc != 0
    basis = reduced_basis(params.space, mismatch)
    M = project_hamiltonian(build_nonhermitian(params), basis)
    alpha0 = initial_amplitudes(params.squeeze, basis)
    traj = propagate_reduced(alpha0, M, basis, t_end, dt_out)
    traj.meta["params"] = params.to_dict()
    return traj


@dataclass
class OracleReport:
    times: np.ndarray
    reduced_pops: np.ndarray
    full_pops: np.ndarray
    reduced_concurrence: np.ndarray
    full_concurrence: np.ndarray

    @property
    def max_pop_deviation(self) -> float:
        return float(np.max(np.abs(self.reduced_pops - self.full_pops)))

    @property
    def max_concurrence_deviation(self) -> float:
        return float(np.max(np.abs(self.reduced_concurrence - self.full_concurrence)))


def oracle_full_vs_reduced(params: SystemParams, sq: SqueezeParams | None = None,
                           t_end: float = 300.0, dt_out: float = 0.5) -> OracleReport:
    """Evolve the same initial ket in the full space (two-plasmon ket kept) and in the reduced basis.

    Both sides are compared through the QD partial trace of the full-space
    ket: Bell populations and concurrence, normalized by the initial norm.
    """
    if params.delta_gbc != 0:
        raise ConfigError("oracle assumes symmetric plasmon-QD couplings")
    sq = params.squeeze if sq is None else sq
    basis = reduced_basis(params.space)
    H = build_nonhermitian(params)
    M = project_hamiltonian(H, basis)
    alpha0 = initial_amplitudes(sq, basis)
    red = propagate_reduced(alpha0, M, basis, t_end, dt_out)

    psi0 = basis.embed(alpha0)
    gen = -1j * H / HBAR
    times = red.times
    full_amps = np.empty((len(times), len(psi0)), dtype=complex)
    full_amps[0] = psi0
    solver = DOP853(lambda t, y: gen @ y, 0.0, psi0, float(times[-1]), rtol=RTOL, atol=ATOL)
    k = 1
    while k < len(times):
        solver.step()
        if solver.status == "failed":
            raise IntegrationError("full-space non-Hermitian integration failed")
        interp = solver.dense_output()
        while k < len(times) and times[k] <= solver.t:
            full_amps[k] = interp(times[k])
            k += 1

    n0 = float(np.vdot(psi0, psi0).real)
    rp, fp, rc, fc = [], [], [], []
    for a, psi in zip(red.amplitudes, full_amps):
        for target_p, target_c, ket in ((rp, rc, basis.embed(a)), (fp, fc, psi)):
            rho = np.outer(ket, ket.conj()) / n0
            target_p.append(bell_populations(rho))
            target_c.append(concurrence_pure(ket.reshape(-1, 4)) / n0)
    return OracleReport(times, np.array(rp), np.array(fp), np.array(rc), np.array(fc))
