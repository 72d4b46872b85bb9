import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdsqueeze.algebra import (CompositeSpace, annihilation, basis_ket, creation, embed, identity,
                               number, product_ket, tensor_ket)
from qdsqueeze.errors import InvalidDimensionError, InvalidEmbeddingError


def test_annihilation_two_level():
    assert np.array_equal(annihilation(2), [[0, 1], [0, 0]])


def test_annihilation_ladder():
    a = annihilation(3)
    assert np.allclose(a @ basis_ket(3, 2), np.sqrt(2) * basis_ket(3, 1))
    assert np.allclose(creation(4) @ annihilation(4) @ basis_ket(4, 2), 2 * basis_ket(4, 2))
    assert np.allclose(np.diag(number(5)), np.arange(5))


def test_annihilation_rejects_small_dim():
    with pytest.raises(InvalidDimensionError):
        annihilation(1)


@pytest.mark.parametrize("dim", [2, 3, 6, 11])
def test_commutator_below_truncation(dim):
    a = annihilation(dim)
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(comm[:-1, :-1], np.eye(dim - 1), atol=1e-14)


def test_composite_space_layout():
    s = CompositeSpace.for_system(8, 3, 1)
    assert s.dims == (8, 3, 2, 2)
    assert s.total_dim == 96
    assert s.photon_site == 0 and s.plasmon_sites == (1,) and s.qd_sites == (2, 3)
    s2 = CompositeSpace.for_system(4, 3, 2)
    assert s2.dims == (4, 3, 3, 2, 2) and s2.plasmon_sites == (1, 2)


def test_composite_space_invariants():
    with pytest.raises(InvalidDimensionError):
        CompositeSpace((4, 3, 3, 2))
    with pytest.raises(InvalidDimensionError):
        CompositeSpace((4, 1, 2, 2))


def test_index_matches_kron_order():
    s = CompositeSpace.for_system(4, 3, 1)
    psi = product_ket(s, 2, 1, 0, 1)
    assert psi[s.index(2, 1, 0, 1)] == 1
    assert np.count_nonzero(psi) == 1


def test_embed_identity_and_action():
    s = CompositeSpace.for_system(4, 3, 1)
    for site in range(4):
        assert np.array_equal(embed(identity(s.dims[site]), site, s), np.eye(s.total_dim))
    a = embed(annihilation(4), 0, s)
    assert np.allclose(a @ product_ket(s, 2, 0, 0, 0), np.sqrt(2) * product_ket(s, 1, 0, 0, 0))


def test_embed_dimension_mismatch():
    s = CompositeSpace.for_system(4, 3, 1)
    with pytest.raises(InvalidEmbeddingError):
        embed(annihilation(3), 0, s)
    with pytest.raises(InvalidEmbeddingError):
        embed(annihilation(2), 7, s)


def _random_op(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_embed_dagger_trace_and_commutation(s1, s2, seed):
    rng = np.random.default_rng(seed)
    space = CompositeSpace((3, 2, 2, 2))
    A = _random_op(rng, space.dims[s1])
    B = _random_op(rng, space.dims[s2])
    EA = embed(A, s1, space)
    assert np.allclose(embed(A.conj().T, s1, space), EA.conj().T)
    assert np.isclose(np.trace(EA), np.trace(A) * space.total_dim / space.dims[s1])
    if s1 != s2:
        EB = embed(B, s2, space)
        assert np.allclose(EA @ EB, EB @ EA)


def test_tensor_ket():
    g = tensor_ket([basis_ket(4, 0), basis_ket(3, 0), basis_ket(2, 0), basis_ket(2, 0)])
    assert g[0] == 1 and np.count_nonzero(g) == 1
    k = tensor_ket([basis_ket(4, 2), basis_ket(3, 0), basis_ket(2, 0), basis_ket(2, 0)])
    assert k[2 * 12] == 1


def test_tensor_ket_norms_multiply():
    v1 = np.array([1.0, 2.0, 0.5])
    v2 = np.array([0.3, 4.0])
    out = tensor_ket([v1, v2], allow_unnormalized=True)
    assert np.isclose(np.linalg.norm(out), np.linalg.norm(v1) * np.linalg.norm(v2))


def test_tensor_ket_rejects_unnormalized():
    with pytest.raises(ValueError):
        tensor_ket([np.array([1.0, 1.0]), basis_ket(2, 0)])
