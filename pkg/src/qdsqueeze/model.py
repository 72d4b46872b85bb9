"""System parameters and operator assembly.

Energies are in meV and times in fs; the propagators divide by ``HBAR``.
Everything is written in the rotating frame of the squeezed drive, so only
detunings appear.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .algebra import CompositeSpace, annihilation, embed
from .errors import ConfigError, ConsistencyError

HBAR = 658.2119569  # meV fs
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SqueezeParams:
    r: float = 0.2
    theta: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ConfigError(f"squeeze strength r must be >= 0, got {self.r}")
        if not np.isfinite(self.theta):
            raise ConfigError(f"squeeze phase must be finite, got {self.theta}")

    @property
    def z(self) -> complex:
        return self.r * np.exp(1j * self.theta)


@dataclass(frozen=True)
class SystemParams:
    """Couplings, dampings, detunings and truncations.

    Defaults are the typical operating point: g_ab=100, g_bc=50, g_ac=2,
    gamma_a=10, gamma_b=150, gamma_c=1.7, epsilon=10 meV, zero detunings.
    ``g_bc`` is the mean plasmon-QD coupling; QD1 gets ``g_bc + delta_gbc/2``
    and QD2 ``g_bc - delta_gbc/2``, identically for every plasmonic particle.
    """

    g_ab: float = 100.0
    g_bc: float = 50.0
    delta_gbc: float = 0.0
    g_ac: float = 2.0
    gamma_a: float = 10.0
    gamma_b: float = 150.0
    gamma_c: float = 1.7
    epsilon: float = 10.0
    delta_a: float = 0.0
    delta_b: float = 0.0
    delta_c: float = 0.0
    omega_0: float = 2.04  # eV, metadata only
    n_ph: int = 8
    n_pl: int = 3
    num_pn: int = 1
    squeeze: SqueezeParams = field(default_factory=SqueezeParams)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def violations(self) -> list[str]:
        out = []
        for name in ("g_ab", "g_bc", "delta_gbc", "g_ac", "gamma_a", "gamma_b",
                     "gamma_c", "epsilon", "delta_a", "delta_b", "delta_c", "omega_0"):
            if not np.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        for name in ("gamma_a", "gamma_b", "gamma_c"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("n_ph", "n_pl"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                out.append(f"{name} must be an integer >= 2, got {v}")
        if self.num_pn not in (1, 2):
            out.append(f"num_pn must be 1 or 2, got {self.num_pn}")
        if not isinstance(self.squeeze, SqueezeParams):
            out.append("squeeze must be SqueezeParams")
        return out

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def space(self) -> CompositeSpace:
        return CompositeSpace.for_system(self.n_ph, self.n_pl, self.num_pn)

    def qd_couplings(self) -> tuple[float, float]:
        """Plasmon coupling of (QD1, QD2) for each plasmonic particle."""
        return (self.g_bc + self.delta_gbc / 2, self.g_bc - self.delta_gbc / 2)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class DissipatorSpec:
    operator: np.ndarray
    rate: float
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigError(f"dissipator rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class ModeOperators:
    a: np.ndarray
    b: tuple[np.ndarray, ...]
    c: tuple[np.ndarray, np.ndarray]


def mode_operators(space: CompositeSpace) -> ModeOperators:
    a = embed(annihilation(space.dims[0]), space.photon_site, space)
    b = tuple(embed(annihilation(space.dims[s]), s, space) for s in space.plasmon_sites)
    c = tuple(embed(annihilation(2), s, space) for s in space.qd_sites)
    return ModeOperators(a, b, c)


def _hc_pair(coef, op):
    return coef * op + np.conj(coef) * op.conj().T


def excitation_number(space: CompositeSpace) -> np.ndarray:
    ops = mode_operators(space)
    n = ops.a.conj().T @ ops.a
    for x in ops.b + ops.c:
        n = n + x.conj().T @ x
    return n


def build_hamiltonian(params: SystemParams, include_drive: bool = True) -> np.ndarray:
    """Rotating-frame Hamiltonian in meV, one or two plasmonic particles.

    The parametric term ``epsilon (a+a+ + aa)`` models continuous pumping and is
    dropped for pulse runs.
    """
    space = params.space
    ops = mode_operators(space)
    a, bs, cs = ops.a, ops.b, ops.c
    ad = a.conj().T
    H = np.zeros((space.total_dim,) * 2, dtype=complex)
    H += params.delta_a * ad @ a
    if include_drive:
        H += _hc_pair(params.epsilon, ad @ ad)
    g1, g2 = params.qd_couplings()
    for b in bs:
        H += params.delta_b * b.conj().T @ b
        H += _hc_pair(params.g_ab, ad @ b)
        for g, c in zip((g1, g2), cs):
            H += _hc_pair(g, b.conj().T @ c)
    for c in cs:
        H += params.delta_c * c.conj().T @ c
        H += _hc_pair(params.g_ac, ad @ c)
    err = np.abs(H - H.conj().T).max()
    if err > HERMITICITY_TOL:
        raise ConsistencyError(f"Hamiltonian not Hermitian (max deviation {err:.2e})")
    return H


def build_dissipators(params: SystemParams) -> list[DissipatorSpec]:
    """Photon loss, plasmon loss per particle, and pure dephasing per QD."""
    ops = mode_operators(params.space)
    out = [DissipatorSpec(ops.a, params.gamma_a, "photon loss")]
    for k, b in enumerate(ops.b, start=1):
        out.append(DissipatorSpec(b, params.gamma_b, f"plasmon {k} loss"))
    for k, c in enumerate(ops.c, start=1):
        out.append(DissipatorSpec(c.conj().T @ c, params.gamma_c, f"QD{k} dephasing"))
    return out


def build_nonhermitian(params: SystemParams) -> np.ndarray:
    """Effective Hamiltonian with decay as negative-imaginary diagonal energies.

    Photon-QD coupling is neglected and the plasmon-QD term couples ``b`` (not
    ``a``) to each dot, which keeps the coherent block Hermitian.
    """
    if params.num_pn != 1:
        raise ConfigError("non-Hermitian model is defined for a single plasmonic particle")
    ops = mode_operators(params.space)
    a, (b,), cs = ops.a, ops.b, ops.c
    ad, bd = a.conj().T, b.conj().T
    H = -1j * params.gamma_a * ad @ a - 1j * params.gamma_b * bd @ b
    H = H + _hc_pair(params.g_ab, ad @ b)
    for g, c in zip(params.qd_couplings(), cs):
        H = H - 1j * params.gamma_c * c.conj().T @ c
        H = H + _hc_pair(g, bd @ c)
    return H
