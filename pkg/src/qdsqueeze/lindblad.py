"""Lindblad propagation, steady states and truncation convergence."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .algebra import CompositeSpace
from .errors import ConvergenceError, IntegrationError
from .model import HBAR, DissipatorSpec, SystemParams, build_dissipators, build_hamiltonian
from .observables import bell_populations_qd, d_metric, partial_trace_qds, _wootters
from .states import initial_state_ground, initial_state_pulse

log = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = -1e-7
CONVERGENCE_TOL = 1e-3


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, dissipators) -> np.ndarray:
    """d rho/dt in 1/fs for Hamiltonian ``H`` (meV) and the given dissipators."""
    out = -1j * (H @ rho - rho @ H)
    for d in dissipators:
        x = d.operator
        xd = x.conj().T
        xdx = xd @ x
        out += 0.5 * d.rate * (2 * x @ rho @ xd - xdx @ rho - rho @ xdx)
    return out / HBAR


def liouvillian(H: np.ndarray, dissipators) -> sp.csr_matrix:
    """Sparse generator acting on row-major ``rho.ravel()``, in 1/fs."""
    n = H.shape[0]
    eye = sp.identity(n, dtype=complex, format="csr")
    Hs = sp.csr_matrix(H)
    L = -1j * (sp.kron(Hs, eye) - sp.kron(eye, Hs.T))
    for d in dissipators:
        if d.rate == 0:
            continue
        x = sp.csr_matrix(d.operator)
        xdx = (x.conj().T @ x).tocsr()
        L = L + d.rate * (sp.kron(x, x.conj()) - 0.5 * sp.kron(xdx, eye) - 0.5 * sp.kron(eye, xdx.T))
    L = (L / HBAR).tocsr()
    L.eliminate_zeros()
    return L


def reachable_indices(L: sp.csr_matrix, support: np.ndarray) -> np.ndarray:
    """Vectorized-state indices reachable from ``support`` under the generator's sparsity graph."""
    pattern = (abs(L) > 0).astype(np.int8).tocsr()
    mask = np.zeros(L.shape[0], dtype=bool)
    mask[support] = True
    while True:
        grown = mask | (pattern @ mask.astype(np.int8) > 0)
        if grown.sum() == mask.sum():
            return np.flatnonzero(mask)
        mask = grown


@dataclass
class Trajectory:
    """Observables sampled on a uniform time grid (fs)."""

    times: np.ndarray
    bell_pops: np.ndarray
    d_metric: np.ndarray
    concurrence: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    herm_err: np.ndarray | None = None
    photon_number: np.ndarray | None = None
    top_fock_pop: np.ndarray | None = None
    snapshot_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None
    amplitudes: np.ndarray | None = None
    labels: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    CSV_COLUMNS = ("t_fs", "P_B1", "P_B2", "P_B3", "P_B4", "D", "concurrence", "trace_err", "min_eig")

    def peak(self) -> tuple[float, float]:
        k = int(np.argmax(self.concurrence))
        return float(self.times[k]), float(self.concurrence[k])

    def max_concurrence(self) -> float:
        return float(np.max(self.concurrence))

    def rows(self):
        for k, t in enumerate(self.times):
            yield (t, *self.bell_pops[k], self.d_metric[k], self.concurrence[k],
                   self.trace_err[k], self.min_eig[k])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.CSV_COLUMNS)
            for row in self.rows():
                w.writerow([f"{v:.12g}" for v in row])

    def state_at(self, t: float) -> np.ndarray:
        if self.snapshots is None:
            raise ValueError("trajectory was propagated without stored snapshots")
        k = int(np.argmin(np.abs(self.snapshot_times - t)))
        return self.snapshots[k]


class _HermitianForm:
    """Real coordinates of a Hermitian matrix restricted to reachable elements.

    Coordinates are Re(rho_ij) for i <= j followed by Im(rho_ij) for i < j, so
    the integrated state is Hermitian by construction.
    """

    def __init__(self, L: sp.csr_matrix, n: int, active: np.ndarray):
        rows, cols = np.divmod(active, n)
        mirror = cols * n + rows
        pos_mirror = np.searchsorted(active, mirror)
        if not np.array_equal(active[pos_mirror], mirror):
            raise IntegrationError("reachable element set is not Hermitian-symmetric")
        upper = np.flatnonzero(rows <= cols)
        strict = np.flatnonzero(rows < cols)
        m_re, m_im = len(upper), len(strict)
        # T maps real coordinates to the complex active elements
        t_rows = np.concatenate([upper, pos_mirror[upper], strict, pos_mirror[strict]])
        t_cols = np.concatenate([np.arange(m_re), np.arange(m_re),
                                 m_re + np.arange(m_im), m_re + np.arange(m_im)])
        t_vals = np.concatenate([np.ones(m_re), np.ones(m_re),
                                 1j * np.ones(m_im), -1j * np.ones(m_im)]).astype(complex)
        diag = rows[upper] == cols[upper]
        # diagonal elements are their own mirror; keep a single entry
        keep = np.ones(len(t_rows), dtype=bool)
        keep[m_re + np.flatnonzero(diag)] = False
        self.T = sp.csr_matrix((t_vals[keep], (t_rows[keep], t_cols[keep])),
                               shape=(len(active), m_re + m_im))
        M = (L[active][:, active] @ self.T).tocsr()
        self.A = sp.vstack([M[upper].real, M[strict].imag]).tocsr()
        self.A.eliminate_zeros()
        self.upper, self.strict = upper, strict

    def encode(self, z: np.ndarray) -> np.ndarray:
        return np.concatenate([z[self.upper].real, z[self.strict].imag])

    def decode(self, y: np.ndarray) -> np.ndarray:
        return self.T @ y


class _Sectors:
    """Row-index blocks on which the evolving density matrix is block diagonal."""

    def __init__(self, n: int, active: np.ndarray):
        rows, cols = np.divmod(active, n)
        graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        ncomp, labels = connected_components(graph, directed=False)
        touched = np.zeros(n, dtype=bool)
        touched[rows] = True
        self.blocks = [np.flatnonzero((labels == k) & touched) for k in range(ncomp)]
        self.blocks = [b for b in self.blocks if len(b)]
        self.complete = bool(touched.all())

    def min_eig(self, rho: np.ndarray) -> float:
        vals = [np.linalg.eigvalsh(rho[np.ix_(b, b)])[0] for b in self.blocks]
        low = min(vals)
        return low if self.complete else min(low, 0.0)

    def bounded_below(self, rho: np.ndarray, floor: float) -> bool:
        """Cheap certificate that every eigenvalue is >= ``floor`` (floor < 0)."""
        try:
            for b in self.blocks:
                np.linalg.cholesky(rho[np.ix_(b, b)] - floor * np.eye(len(b)))
        except np.linalg.LinAlgError:
            return False
        return True


def propagate(
    rho0: np.ndarray,
    H: np.ndarray,
    dissipators,
    t_end: float,
    dt_out: float = 0.5,
    *,
    space: CompositeSpace | None = None,
    snapshot_every: float | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    check: bool = True,
    min_eig_stride: int = 1,
) -> Trajectory:
    """Integrate the master equation from ``rho0`` and sample observables every ``dt_out`` fs.

    Integration uses an adaptive 8(5,3) Dormand-Prince pair on the sparse
    generator restricted to the matrix elements reachable from ``rho0``,
    written in real coordinates of a Hermitian matrix.
    Trace drift, Hermiticity and the smallest eigenvalue are checked at every
    output time; a violation raises :class:`IntegrationError` unless
    ``check`` is false.  With ``space`` given, the mean photon number and the
    population of the highest photon Fock level are tracked as well.
    ``snapshot_every`` (fs) stores full states for steady-state detection.
    With ``min_eig_stride`` > 1 the smallest eigenvalue is computed only on
    every n-th sample (NaN elsewhere); the positivity gate still runs on all
    samples through a Cholesky certificate.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    rho0 = np.asarray(rho0, dtype=complex)
    n = rho0.shape[0]
    if n % 4:
        raise ValueError(f"state dimension {n} does not end in two QD factors")
    L = liouvillian(H, dissipators)
    y0_full = rho0.ravel()
    herm = np.abs(rho0 - rho0.conj().T).max()
    if herm > HERMITICITY_TOL:
        raise ValueError(f"initial state is not Hermitian (deviation {herm:.2e})")
    support = np.flatnonzero(y0_full)
    support = np.union1d(support, np.flatnonzero(rho0.T.ravel()))
    active = reachable_indices(L, support)
    form = _HermitianForm(L, n, active)
    sectors = _Sectors(n, active)
    photon_dim = space.dims[0] if space is not None else None

    times = np.arange(0.0, t_end + 0.5 * dt_out, dt_out)
    times = times[times <= t_end + 1e-9]
    T = len(times)
    pops = np.empty((T, 4))
    dm = np.empty(T)
    conc = np.empty(T)
    trace_err = np.empty(T)
    min_eig = np.empty(T)
    herm_err = np.empty(T)
    nphot = np.empty(T)
    top = np.empty(T)
    stride = None if snapshot_every is None else max(1, int(round(snapshot_every / dt_out)))
    snaps, snap_t = [], []
    tr0 = np.trace(rho0).real

    full = np.zeros(n * n, dtype=complex)

    def record(k, y):
        full[active] = form.decode(y)
        rho = full.reshape(n, n)
        rho_c = partial_trace_qds(rho)
        p = bell_populations_qd(rho_c)
        pops[k] = p
        dm[k] = d_metric(p)
        tr = np.trace(rho).real
        trace_err[k] = abs(tr - tr0)
        conc[k] = min(_wootters(rho_c / tr), 1.0)
        herm_err[k] = np.abs(rho - rho.conj().T).max()
        if k % min_eig_stride == 0 or k == T - 1:
            min_eig[k] = sectors.min_eig(rho)
        elif sectors.bounded_below(rho, POSITIVITY_TOL):
            min_eig[k] = np.nan
        else:
            min_eig[k] = sectors.min_eig(rho)
        if photon_dim:
            diag = np.diagonal(rho).real.reshape(photon_dim, -1).sum(axis=1)
            nphot[k] = diag @ np.arange(photon_dim)
            top[k] = diag[-1]
        else:
            nphot[k] = top[k] = np.nan
        if stride is not None and (k % stride == 0 or k == T - 1):
            snaps.append(rho.copy())
            snap_t.append(times[k])
        if check:
            _gate(times[k], trace_err[k], herm_err[k], np.nan_to_num(min_eig[k], nan=0.0))

    y0 = form.encode(0.5 * (y0_full + rho0.conj().T.ravel())[active])
    A = form.A
    record(0, y0)
    solver = DOP853(lambda t, y: A @ y, 0.0, y0, float(times[-1]), rtol=rtol, atol=atol)
    k = 1
    while k < T:
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integrator failed at t={solver.t:.3f} fs: {msg}",
                                   {"t_fs": solver.t})
        interp = None
        while k < T and times[k] <= solver.t:
            if times[k] == solver.t:
                y = solver.y
            else:
                if interp is None:
                    interp = solver.dense_output()
                y = interp(times[k])
            record(k, y)
            k += 1
        if solver.status == "finished" and k < T:
            for j in range(k, T):
                record(j, solver.y)
            k = T

    traj = Trajectory(
        times=times,
        bell_pops=pops,
        d_metric=dm,
        concurrence=conc,
        trace_err=trace_err,
        min_eig=min_eig,
        herm_err=herm_err,
        photon_number=nphot,
        top_fock_pop=top,
        snapshot_times=np.array(snap_t) if stride is not None else None,
        snapshots=np.array(snaps) if stride is not None else None,
        meta={"rtol": rtol, "atol": atol, "method": "DOP853", "dt_out_fs": dt_out,
              "t_end_fs": float(times[-1]), "active_elements": int(len(active)),
              "nfev": int(solver.nfev)},
    )
    if photon_dim and np.nanmax(top) > 1e-3:
        log.warning("top photon Fock level reaches population %.2e; truncation may be too small",
                    np.nanmax(top))
    return traj


def _gate(t, terr, herr, mineig):
    if terr > TRACE_TOL:
        raise IntegrationError(f"trace drift {terr:.2e} at t={t:.2f} fs", {"t_fs": t, "trace_err": terr})
    if herr > HERMITICITY_TOL:
        raise IntegrationError(f"Hermiticity error {herr:.2e} at t={t:.2f} fs", {"t_fs": t, "herm_err": herr})
    if mineig < POSITIVITY_TOL:
        raise IntegrationError(f"negative eigenvalue {mineig:.2e} at t={t:.2f} fs", {"t_fs": t, "min_eig": mineig})


def detect_steady_state(traj: Trajectory, window: float = 100.0, tol: float = 1e-6):
    """Earliest stored time after which the state moves by less than ``tol`` (max norm).

    Returns ``(time, rho)`` or ``None`` when the run ends before ``window`` fs
    of stationarity have been observed.
    """
    if traj.snapshots is None:
        raise ValueError("steady-state detection needs stored snapshots")
    ts, states = traj.snapshot_times, traj.snapshots
    final = states[-1]
    dev = np.abs(states - final).reshape(len(ts), -1).max(axis=1)
    # suffix max: largest deviation from the final state at or after each snapshot
    suffix = np.maximum.accumulate(dev[::-1])[::-1]
    ok = np.flatnonzero((suffix < tol / 2) & (ts[-1] - ts >= window))
    if len(ok) == 0:
        return None
    k = ok[0]
    return float(ts[k]), states[k]


def steady_state(H: np.ndarray, dissipators, rho_hint: np.ndarray | None = None) -> np.ndarray:
    """Null vector of the generator with unit trace, by sparse LU.

    Restricted to the elements reachable from ``rho_hint`` (default: the
    global ground state); assumes the steady state in that sector is unique.
    """
    n = H.shape[0]
    if rho_hint is None:
        rho_hint = np.zeros((n, n), dtype=complex)
        rho_hint[0, 0] = 1.0
    L = liouvillian(H, dissipators)
    active = reachable_indices(L, np.flatnonzero(np.asarray(rho_hint).ravel()))
    A = L[active][:, active].tolil()
    diag_pos = np.flatnonzero(active // n == active % n)
    row = diag_pos[0]
    trace_row = np.zeros(len(active), dtype=complex)
    trace_row[diag_pos] = 1.0
    A[row, :] = trace_row
    b = np.zeros(len(active), dtype=complex)
    b[row] = 1.0
    x = spsolve(A.tocsc(), b)
    rho = np.zeros(n * n, dtype=complex)
    rho[active] = x
    rho = rho.reshape(n, n)
    return 0.5 * (rho + rho.conj().T)


# --- end-to-end runs on SystemParams -------------------------------------------------

PULSE_T_END = 500.0
PUMP_T_END = 1000.0
RETRY_FACTOR = 100.0


def simulate(params: SystemParams, mode: str = "pump", t_end: float | None = None,
             dt_out: float = 0.5, *, retry: bool = True, **kwargs) -> Trajectory:
    """Pulse (squeezed initial state, no drive) or pump (ground state, drive on).

    With ``retry`` a run that trips a quality gate is repeated once with
    ``rtol`` and ``atol`` divided by ``RETRY_FACTOR``; the gates themselves
    are unchanged and a second violation is raised.
    """
    if mode == "pulse":
        H = build_hamiltonian(params, include_drive=False)
        rho0 = initial_state_pulse(params)
        t_end = PULSE_T_END if t_end is None else t_end
    elif mode == "pump":
        H = build_hamiltonian(params, include_drive=True)
        rho0 = initial_state_ground(params.space)
        t_end = PUMP_T_END if t_end is None else t_end
    else:
        raise ValueError(f"unknown mode {mode!r}")
    dissipators = build_dissipators(params)
    try:
        traj = propagate(rho0, H, dissipators, t_end, dt_out, space=params.space, **kwargs)
    except IntegrationError as exc:
        if not retry:
            raise
        kwargs["rtol"] = kwargs.get("rtol", RTOL) / RETRY_FACTOR
        kwargs["atol"] = kwargs.get("atol", ATOL) / RETRY_FACTOR
        log.info("retrying with rtol=%.0e after: %s", kwargs["rtol"], exc)
        traj = propagate(rho0, H, dissipators, t_end, dt_out, space=params.space, **kwargs)
        traj.meta["retried"] = {"reason": str(exc), "rtol": kwargs["rtol"], "atol": kwargs["atol"]}
    traj.meta.update({"mode": mode, "params": params.to_dict()})
    return traj


def steady_state_for(params: SystemParams) -> np.ndarray:
    """Steady state of the driven system started from the ground state."""
    H = build_hamiltonian(params, include_drive=True)
    return steady_state(H, build_dissipators(params))


@dataclass
class ConvergenceReport:
    base: tuple[int, int]
    deviations: dict[str, float]
    tol: float
    curves: dict[str, np.ndarray]
    times: np.ndarray

    @property
    def offending(self) -> list[str]:
        return [k for k, v in self.deviations.items() if not v < self.tol]

    @property
    def converged(self) -> bool:
        return not self.offending


def convergence_check(params: SystemParams, t_end: float | None = None, mode: str = "pump",
                      *, dt_out: float = 0.5, tol: float = CONVERGENCE_TOL,
                      raise_on_failure: bool = True) -> ConvergenceReport:
    """Rerun with n_ph+2 and, separately, n_pl+1; compare concurrence curves."""
    runs = {
        "base": params,
        "n_ph": params.replace(n_ph=params.n_ph + 2),
        "n_pl": params.replace(n_pl=params.n_pl + 1),
    }
    curves = {}
    times = None
    for name, p in runs.items():
        tr = simulate(p, mode, t_end, dt_out)
        curves[name] = tr.concurrence
        times = tr.times
    devs = {name: float(np.max(np.abs(curves[name] - curves["base"]))) for name in ("n_ph", "n_pl")}
    report = ConvergenceReport((params.n_ph, params.n_pl), devs, tol, curves, times)
    if raise_on_failure and not report.converged:
        detail = ", ".join(f"{k} (max concurrence shift {devs[k]:.2e})" for k in report.offending)
        raise ConvergenceError(f"truncation not converged in {detail}", report)
    return report


__all__ = [
    "Trajectory",
    "ConvergenceReport",
    "lindblad_rhs",
    "liouvillian",
    "reachable_indices",
    "propagate",
    "detect_steady_state",
    "steady_state",
    "steady_state_for",
    "simulate",
    "convergence_check",
    "DissipatorSpec",
]
