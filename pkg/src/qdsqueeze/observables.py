"""Reduced QD state, Bell populations, the D metric and Wootters concurrence."""
from __future__ import annotations

import numpy as np

from .algebra import CompositeSpace
from .errors import InvalidDimensionError, InvalidStateError
from .states import BELL, MAGIC

EIG_CLAMP = 1e-10
TRACE_TOL = 1e-6

_SY = np.array([[0, -1j], [1j, 0]])
SIGMA_YY = np.kron(_SY, _SY)


def partial_trace_qds(rho: np.ndarray, space: CompositeSpace | None = None) -> np.ndarray:
    """Trace out photons and plasmons, leaving the 4x4 state of (QD1, QD2).

    The QD factors are always last, so only the total dimension matters; the
    optional ``space`` is used to validate it.
    """
    rho = np.asarray(rho)
    n = rho.shape[0]
    if rho.shape != (n, n) or n % 4:
        raise InvalidDimensionError(f"cannot trace QDs out of shape {rho.shape}")
    if space is not None and space.total_dim != n:
        raise InvalidDimensionError(
            f"state of dim {n} does not live on space {space.dims}"
        )
    rest = n // 4
    return np.einsum("aiaj->ij", rho.reshape(rest, 4, rest, 4))


def bell_populations_qd(rho_c: np.ndarray) -> np.ndarray:
    return np.einsum("ki,ij,kj->k", BELL.conj(), rho_c, BELL).real


def bell_populations(rho: np.ndarray, space: CompositeSpace | None = None) -> np.ndarray:
    """(P_B1, P_B2, P_B3, P_B4) of the full state."""
    return bell_populations_qd(partial_trace_qds(rho, space))


def d_metric(pops) -> float:
    """Excess of the B2 population over the other three, floored at zero."""
    p1, p2, p3, p4 = (float(p) for p in pops)
    return max(p2 - (p1 + p3 + p4), 0.0)


def _wootters(rho_c: np.ndarray) -> float:
    # Homogeneous of degree one in rho_c, so unnormalized states give scaled values.
    rho_tilde = SIGMA_YY @ rho_c.conj() @ SIGMA_YY
    ev = np.linalg.eigvals(rho_c @ rho_tilde).real
    ev[ev < EIG_CLAMP] = 0.0
    lam = np.sort(np.sqrt(ev))[::-1]
    return float(max(lam[0] - lam[1] - lam[2] - lam[3], 0.0))


def concurrence_mixed(rho_c: np.ndarray) -> float:
    """Wootters concurrence of a normalized two-qubit density matrix."""
    rho_c = np.asarray(rho_c, dtype=complex)
    if rho_c.shape != (4, 4):
        raise InvalidDimensionError(f"expected 4x4 QD state, got {rho_c.shape}")
    tr = np.trace(rho_c).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"QD state trace {tr:.8f} deviates from 1")
    return min(_wootters(rho_c), 1.0)


def concurrence_of_state(rho: np.ndarray, space: CompositeSpace | None = None) -> float:
    return concurrence_mixed(partial_trace_qds(rho, space))


def concurrence_pure(blocks) -> float:
    """Concurrence of a pure state given as its QD components per (photon, plasmon) block.

    ``blocks`` is an array of shape (n_blocks, 4): row k is the unnormalized
    two-QD ket attached to the k-th photon/plasmon configuration.  With a
    single occupied block the magic-basis form ``|sum beta_i^2|`` is used;
    otherwise the traced state is a mixture over blocks and the Wootters
    formula is applied to it.  Norm loss is kept (no renormalization).
    """
    blocks = np.atleast_2d(np.asarray(blocks, dtype=complex))
    if blocks.shape[1] != 4:
        raise InvalidDimensionError(f"QD components must have length 4, got {blocks.shape}")
    occupied = blocks[np.linalg.norm(blocks, axis=1) > 0]
    if len(occupied) == 0:
        return 0.0
    if len(occupied) == 1:
        beta = MAGIC.conj() @ occupied[0]
        return float(abs(np.sum(beta**2)))
    rho_c = occupied.T @ occupied.conj()
    return _wootters(rho_c)


def qd_blocks(psi: np.ndarray) -> np.ndarray:
    """Split a full-space ket into its per-block QD components."""
    psi = np.asarray(psi)
    return psi.reshape(-1, 4)
