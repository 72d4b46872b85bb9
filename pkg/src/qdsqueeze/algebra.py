"""Truncated Fock-space operators and tensor-product embedding.

Factor order is fixed everywhere as (photon, plasmon[, plasmon], QD1, QD2).
All operators are dense ``complex128`` arrays; total dimensions stay below a
few hundred at the truncations used here.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InvalidDimensionError, InvalidEmbeddingError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class CompositeSpace:
    """Ordered subsystem dimensions of the tensor-product Hilbert space.

    The last two factors are the quantum dots and always have dimension 2.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) < 4 or len(dims) > 5:
            raise InvalidDimensionError(
                f"expected (photon, plasmon[, plasmon], QD, QD) factors, got {dims}"
            )
        if any(d < 2 for d in dims):
            raise InvalidDimensionError(f"every factor needs dim >= 2, got {dims}")
        if dims[-2:] != (2, 2):
            raise InvalidDimensionError(f"QD factors must have dim 2, got {dims[-2:]}")

    @classmethod
    def for_system(cls, n_ph: int, n_pl: int, num_pn: int = 1) -> "CompositeSpace":
        return cls((n_ph,) + (n_pl,) * num_pn + (2, 2))

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def num_pn(self) -> int:
        return len(self.dims) - 3

    @property
    def photon_site(self) -> int:
        return 0

    @property
    def plasmon_sites(self) -> tuple[int, ...]:
        return tuple(range(1, 1 + self.num_pn))

    @property
    def qd_sites(self) -> tuple[int, int]:
        n = len(self.dims)
        return (n - 2, n - 1)

    def index(self, *occupations: int) -> int:
        """Flat index of the product basis ket with the given occupations."""
        if len(occupations) != len(self.dims):
            raise InvalidDimensionError(
                f"need {len(self.dims)} occupation numbers, got {len(occupations)}"
            )
        for n, d in zip(occupations, self.dims):
            if not 0 <= n < d:
                raise InvalidDimensionError(f"occupation {n} outside truncation {d}")
        return int(np.ravel_multi_index(occupations, self.dims))

    def occupations(self) -> np.ndarray:
        """Array of shape (total_dim, n_factors) listing each basis ket's occupations."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()


def annihilation(dim: int) -> np.ndarray:
    """Truncated lowering operator with sqrt(n) on the first superdiagonal."""
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).conj().T


def number(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def basis_ket(dim: int, n: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"number state |{n}> outside truncation {dim}")
    ket = np.zeros(dim, dtype=complex)
    ket[n] = 1.0
    return ket


def embed(op: np.ndarray, site: int, space: CompositeSpace) -> np.ndarray:
    """Place ``op`` on factor ``site`` with identities on every other factor."""
    op = np.asarray(op)
    if not 0 <= site < len(space.dims):
        raise InvalidEmbeddingError(f"site {site} out of range for {space.dims}")
    d = space.dims[site]
    if op.shape != (d, d):
        raise InvalidEmbeddingError(
            f"operator of shape {op.shape} cannot act on factor {site} of dim {d}"
        )
    left = int(np.prod(space.dims[:site], dtype=int))
    right = int(np.prod(space.dims[site + 1:], dtype=int))
    return np.kron(np.kron(np.eye(left), op), np.eye(right)).astype(complex)


def tensor_ket(factors, *, allow_unnormalized: bool = False) -> np.ndarray:
    """Kronecker product of kets in the given order."""
    factors = [np.asarray(f, dtype=complex).ravel() for f in factors]
    if not factors:
        raise InvalidDimensionError("tensor_ket needs at least one factor")
    if not allow_unnormalized:
        for k, f in enumerate(factors):
            if abs(np.linalg.norm(f) - 1.0) > NORM_TOL:
                raise InvalidDimensionError(
                    f"factor {k} has norm {np.linalg.norm(f):.3e}; "
                    "pass allow_unnormalized=True to permit"
                )
    return reduce(np.kron, factors)


def product_ket(space: CompositeSpace, *occupations: int) -> np.ndarray:
    """Basis ket |n_a, n_b, ..., n_c1, n_c2> of ``space``."""
    ket = np.zeros(space.total_dim, dtype=complex)
    ket[space.index(*occupations)] = 1.0
    return ket
