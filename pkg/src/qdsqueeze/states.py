"""Squeezed vacuum, Bell and magic bases, and initial system states."""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .algebra import CompositeSpace, basis_ket, tensor_ket
from .errors import TruncationError
from .model import SqueezeParams, SystemParams

LEAKAGE_TOL = 1e-3

_S = 1 / np.sqrt(2)

# Rows are B1..B4 in the QD product basis (|00>, |01>, |10>, |11>).
BELL = np.array(
    [
        [_S, 0, 0, _S],
        [_S, 0, 0, -_S],
        [0, _S, _S, 0],
        [0, _S, -_S, 0],
    ],
    dtype=complex,
)

# e1 = B1, e2 = i B2, e3 = i B3, e4 = B4
MAGIC = BELL * np.array([1, 1j, 1j, 1])[:, None]


def bell_basis() -> np.ndarray:
    """The four Bell kets as rows, over the two-QD space."""
    return BELL.copy()


def magic_basis() -> np.ndarray:
    return MAGIC.copy()


@dataclass(frozen=True)
class SqueezedVacuum:
    ket: np.ndarray
    leakage: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.ket) ** 2


def squeezed_vacuum_coefficient(n_pairs: int, sq: SqueezeParams) -> complex:
    """Amplitude of |2n> in the untruncated squeezed vacuum."""
    n = n_pairs
    # sqrt((2n)!)/n! via log-gamma to stay finite for large n
    log_mag = 0.5 * lgamma(2 * n + 1) - lgamma(n + 1)
    base = -0.5 * np.exp(1j * sq.theta) * np.tanh(sq.r)
    if n == 0:
        return 1 / np.sqrt(np.cosh(sq.r))
    if base == 0:
        return 0j
    return np.exp(log_mag) * base**n / np.sqrt(np.cosh(sq.r))


def squeezed_vacuum(sq: SqueezeParams, n_ph: int, *, max_leakage: float = LEAKAGE_TOL) -> SqueezedVacuum:
    """Squeezed vacuum truncated to ``n_ph`` Fock states and renormalized.

    ``leakage`` is the probability lost to the truncation before renormalizing.
    """
    if n_ph < 2:
        raise TruncationError(f"n_ph must be >= 2, got {n_ph}")
    ket = np.zeros(n_ph, dtype=complex)
    for k in range(0, (n_ph + 1) // 2):
        ket[2 * k] = squeezed_vacuum_coefficient(k, sq)
    norm2 = float(np.vdot(ket, ket).real)
    leakage = max(0.0, 1.0 - norm2)
    if leakage > max_leakage:
        raise TruncationError(
            f"squeezed vacuum with r={sq.r} leaks {leakage:.2e} beyond n_ph={n_ph}; "
            "increase n_ph"
        )
    return SqueezedVacuum(ket / np.sqrt(norm2), leakage)


def initial_state_pulse(params: SystemParams) -> np.ndarray:
    """|xi, 0, 0, 0><xi, 0, 0, 0| with photons in the squeezed vacuum."""
    space = params.space
    photons = squeezed_vacuum(params.squeeze, space.dims[0]).ket
    rest = [basis_ket(d, 0) for d in space.dims[1:]]
    psi = tensor_ket([photons] + rest)
    return np.outer(psi, psi.conj())


def initial_state_ground(space: CompositeSpace) -> np.ndarray:
    rho = np.zeros((space.total_dim,) * 2, dtype=complex)
    rho[0, 0] = 1.0
    return rho


def squeezed_probability_table(sq: SqueezeParams, n_max: int) -> list[tuple[int, float]]:
    """Untruncated photon-number probabilities P(n) for n < n_max."""
    out = []
    for n in range(n_max):
        p = abs(squeezed_vacuum_coefficient(n // 2, sq)) ** 2 if n % 2 == 0 else 0.0
        out.append((n, float(p)))
    return out


__all__ = [
    "BELL",
    "MAGIC",
    "SqueezedVacuum",
    "bell_basis",
    "magic_basis",
    "squeezed_vacuum",
    "squeezed_vacuum_coefficient",
    "initial_state_pulse",
    "initial_state_ground",
    "squeezed_probability_table",
]
