import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclid.errors import ExpansionError, InconsistentBasisError, InvalidDimensionError
from tclid.su_algebra import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    LieBasis,
    build_basis,
    expand_operator,
    pauli_basis,
    pauli_operator,
    structure_constants,
)

TOL = 1e-10


def _comm(a, b):
    return a @ b - b @ a


def test_su2_is_scaled_pauli():
    b = build_basis(2)
    np.testing.assert_allclose(b.matrices, np.array([SIGMA_X, SIGMA_Y, SIGMA_Z]) / np.sqrt(2), atol=1e-15)
    assert np.trace(b[0] @ b[0]).real == pytest.approx(1.0)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_basis_properties(N):
    b = build_basis(N)
    L = b.matrices
    assert L.shape == (N * N - 1, N, N)
    assert np.max(np.abs(L - np.conj(np.swapaxes(L, 1, 2)))) < TOL
    assert np.max(np.abs(np.einsum("kaa->k", L))) < TOL
    gram = np.array([[np.trace(x @ y) for y in L] for x in L])
    np.testing.assert_allclose(gram, np.eye(N * N - 1), atol=TOL)


@pytest.mark.parametrize("n", [1, 2])
def test_pauli_basis_properties(n):
    b = pauli_basis(n)
    assert b.M == 4**n - 1
    np.testing.assert_allclose(b.gram(), np.eye(b.M), atol=TOL)
    assert b.labels[0] == "I" * (n - 1) + "X"


@pytest.mark.parametrize("N", [0, 1, 2.5])
def test_invalid_dimension(N):
    with pytest.raises(InvalidDimensionError):
        build_basis(N)


def test_non_orthonormal_basis_rejected():
    b = build_basis(2)
    bad = LieBasis(2, b.matrices * 2.0, "gell-mann", b.labels)
    with pytest.raises(InconsistentBasisError):
        structure_constants(bad)


def test_su2_structure_constants():
    sc = structure_constants(build_basis(2))
    assert sc.C[0, 1, 2] == pytest.approx(np.sqrt(2), abs=1e-14)
    assert np.max(np.abs(sc.D)) < 1e-14


def test_su4_C_antisymmetric():
    sc = structure_constants(build_basis(4))
    assert np.max(np.abs(sc.C + np.swapaxes(sc.C, 0, 1))) < 1e-12


@pytest.mark.parametrize("N", [2, 3, 4])
def test_structure_constant_symmetries(N):
    sc = structure_constants(build_basis(N))
    C, D = sc.C, sc.D
    # C totally antisymmetric, D totally symmetric
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        assert np.max(np.abs(C + C.transpose(perm))) < TOL
        assert np.max(np.abs(D - D.transpose(perm))) < TOL
    assert np.max(np.abs(np.einsum("jjl->l", D))) < TOL


@pytest.mark.parametrize("N", [2, 3, 4])
def test_reconstruction_identities(N):
    b = build_basis(N)
    sc = structure_constants(b)
    L = b.matrices
    for j in range(b.M):
        for k in range(b.M):
            comm = _comm(L[j], L[k])
            anti = L[j] @ L[k] + L[k] @ L[j]
            np.testing.assert_allclose(comm, 1j * np.tensordot(sc.C[j, k], L, axes=1), atol=TOL)
            expect = (2.0 / N) * (j == k) * np.eye(N) + np.tensordot(sc.D[j, k], L, axes=1)
            np.testing.assert_allclose(anti, expect, atol=TOL)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_jacobi(N):
    C = structure_constants(build_basis(N)).C
    # sum_m C_jkm C_mlp + C_klm C_mjp + C_ljm C_mkp = 0
    J = (
        np.einsum("jkm,mlp->jklp", C, C)
        + np.einsum("klm,mjp->jklp", C, C)
        + np.einsum("ljm,mkp->jklp", C, C)
    )
    assert np.max(np.abs(J)) < 1e-9


def test_expand_identity():
    b = build_basis(2)
    tr, x = expand_operator(np.eye(2), b)
    assert tr == 1.0
    np.testing.assert_array_equal(x, np.zeros(3))
    # maximally mixed state
    tr, x = expand_operator(np.eye(2) / 2, b)
    assert tr == 0.5
    np.testing.assert_array_equal(x, np.zeros(3))


def test_expand_basis_element():
    b = build_basis(3)
    tr, x = expand_operator(b[2], b)
    assert tr == pytest.approx(0.0)
    np.testing.assert_allclose(x, np.eye(8)[2], atol=1e-15)


def test_expand_two_qubit_hamiltonian_support():
    b = pauli_basis(2)
    H = (
        0.75 * pauli_operator("ZI")
        + 0.75 * pauli_operator("IZ")
        + 0.5 * (pauli_operator("XX") + pauli_operator("YY"))
    )
    _, h = expand_operator(H, b)
    nonzero = {b.labels[i] for i in np.flatnonzero(np.abs(h) > 1e-14)}
    assert nonzero == {"ZI", "IZ", "XX", "YY"}


def test_expand_non_hermitian():
    b = build_basis(2)
    with pytest.raises(ExpansionError) as err:
        expand_operator(np.array([[0, 1], [0, 0]]), b)
    assert err.value.residue == pytest.approx(1.0)


def test_pauli_operator_ladder():
    np.testing.assert_array_equal(pauli_operator("-"), np.array([[0, 0], [1, 0]]))
    with pytest.raises(ValueError):
        pauli_operator("Q")


@settings(max_examples=30, deadline=None)
@given(N=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_expand_roundtrip(N, seed):
    rng = np.random.default_rng(seed)
    b = build_basis(N)
    X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    X = X + X.conj().T
    tr, x = expand_operator(X, b)
    np.testing.assert_allclose(b.reconstruct(tr, x), X, atol=1e-12)
