"""Orthonormal bases of su(N) and their structure constants.

Two basis families are provided:

``build_basis(N)``
    Generalized Gell-Mann matrices divided by sqrt(2), so that
    ``tr(L_j L_k) = delta_jk``.  Ordering (0-based indices): the symmetric
    off-diagonal matrices for pairs ``(a, b), a < b`` in row-major order, then
    the antisymmetric ones in the same pair order, then the ``N - 1`` diagonal
    matrices by increasing size of their support.

``pauli_basis(n_qubits)``
    Tensor products of Pauli matrices divided by sqrt(2**n), identity string
    excluded, ordered lexicographically over the alphabet ``I < X < Y < Z``
    with qubit 1 as the leftmost tensor factor (``"ZI"`` is sigma^z on qubit 1).

Both orderings are stable and are part of the file-format contract: model
files and result CSVs refer to basis elements by these indices and labels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import ExpansionError, InconsistentBasisError, InvalidDimensionError

# construction / derived / accumulated-identity tolerances
TOL_BUILD = 1e-12
TOL_DERIVED = 1e-10
TOL_IDENTITY = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = 0.5 * (SIGMA_X + 1j * SIGMA_Y)
SIGMA_MINUS = 0.5 * (SIGMA_X - 1j * SIGMA_Y)

SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": SIGMA_X,
    "Y": SIGMA_Y,
    "Z": SIGMA_Z,
    "+": SIGMA_PLUS,
    "-": SIGMA_MINUS,
}


def pauli_operator(label: str) -> np.ndarray:
    """Tensor product for a string over ``I X Y Z + -`` (qubit 1 leftmost)."""
    try:
        factors = [SINGLE_QUBIT[ch] for ch in label.upper()]
    except KeyError as exc:
        raise ValueError(f"unknown single-qubit symbol {exc.args[0]!r} in {label!r}") from None
    if not factors:
        raise ValueError("empty operator label")
    return reduce(np.kron, factors)


@dataclass(frozen=True)
class LieBasis:
    """Ordered orthonormal basis ``{L_k}`` of su(N).

    Attributes
    ----------
    dimension : int
        Hilbert-space dimension N.
    matrices : ndarray, shape (M, N, N)
        The basis elements, M = N**2 - 1.
    ordering_tag : str
        ``"gell-mann"`` or ``"pauli"``.
    labels : tuple of str
        Human-readable label per element.
    """

    dimension: int
    matrices: np.ndarray = field(repr=False)
    ordering_tag: str
    labels: tuple

    def __post_init__(self):
        self.matrices.setflags(write=False)

    @property
    def M(self) -> int:
        return self.matrices.shape[0]

    def __len__(self):
        return self.M

    def __getitem__(self, k):
        return self.matrices[k]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def gram(self) -> np.ndarray:
        return np.einsum("jab,kba->jk", self.matrices, self.matrices)

    def reconstruct(self, trace_part, coefficients) -> np.ndarray:
        """Inverse of :func:`expand_operator`."""
        n = self.dimension
        out = trace_part * np.eye(n, dtype=complex)
        return out + np.tensordot(np.asarray(coefficients), self.matrices, axes=1)


def build_basis(N: int) -> LieBasis:
    """Generalized Gell-Mann basis of su(N), normalised to ``tr(L_j L_k) = delta_jk``."""
    if int(N) != N or N < 2:
        raise InvalidDimensionError(f"su(N) basis needs an integer N >= 2, got {N!r}")
    N = int(N)
    pairs = [(a, b) for a in range(N) for b in range(a + 1, N)]
    mats, labels = [], []
    for a, b in pairs:
        m = np.zeros((N, N), dtype=complex)
        m[a, b] = m[b, a] = 1.0
        mats.append(m / np.sqrt(2))
        labels.append(f"S{a + 1}{b + 1}")
    for a, b in pairs:
        m = np.zeros((N, N), dtype=complex)
        m[a, b] = -1j
        m[b, a] = 1j
        mats.append(m / np.sqrt(2))
        labels.append(f"A{a + 1}{b + 1}")
    for ell in range(1, N):
        diag = np.zeros(N)
        diag[:ell] = 1.0
        diag[ell] = -ell
        mats.append(np.diag(diag).astype(complex) / np.sqrt(ell * (ell + 1)))
        labels.append(f"D{ell}")
    basis = LieBasis(N, np.array(mats), "gell-mann", tuple(labels))
    _check_basis(basis, TOL_BUILD)
    return basis


def pauli_basis(n_qubits: int) -> LieBasis:
    """Normalised Pauli-string basis of su(2**n_qubits)."""
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise InvalidDimensionError(f"need at least one qubit, got {n_qubits!r}")
    n_qubits = int(n_qubits)
    N = 2**n_qubits
    labels = ["".join(s) for s in itertools.product("IXYZ", repeat=n_qubits)][1:]
    mats = np.array([pauli_operator(s) for s in labels]) / np.sqrt(N)
    basis = LieBasis(N, mats, "pauli", tuple(labels))
    _check_basis(basis, TOL_BUILD)
    return basis


def _check_basis(basis: LieBasis, tol: float) -> None:
    L = basis.matrices
    N = basis.dimension
    if L.shape != (N * N - 1, N, N):
        raise InconsistentBasisError(f"expected {N * N - 1} matrices of size {N}x{N}, got {L.shape}")
    if np.max(np.abs(L - np.conj(np.swapaxes(L, 1, 2)))) > tol:
        raise InconsistentBasisError("basis elements are not Hermitian")
    if np.max(np.abs(np.einsum("kaa->k", L))) > tol:
        raise InconsistentBasisError("basis elements are not traceless")
    if np.max(np.abs(basis.gram() - np.eye(basis.M))) > TOL_DERIVED:
        raise InconsistentBasisError("basis is not Hilbert-Schmidt orthonormal")


@dataclass(frozen=True)
class StructureConstants:
    """Real tensors with ``[L_j, L_k] = i sum_l C[j,k,l] L_l`` and
    ``{L_j, L_k} = (2/N) delta_jk I + sum_l D[j,k,l] L_l``."""

    C: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    dimension: int

    def __post_init__(self):
        self.C.setflags(write=False)
        self.D.setflags(write=False)


def structure_constants(basis: LieBasis) -> StructureConstants:
    """Antisymmetric (C) and symmetric (D) structure constants of ``basis``."""
    _check_basis(basis, TOL_DERIVED)
    L = basis.matrices
    # T[j,k,l] = tr(L_j L_k L_l)
    T = np.einsum("jab,kbc,lca->jkl", L, L, L, optimize=True)
    Tt = np.swapaxes(T, 0, 1)
    C = -1j * (T - Tt)
    D = T + Tt
    for name, arr in (("C", C), ("D", D)):
        residue = np.max(np.abs(arr.imag), initial=0.0)
        if residue > TOL_DERIVED:
            raise InconsistentBasisError(f"structure constants {name} not real (residue {residue:.2e})")
    return StructureConstants(np.ascontiguousarray(C.real), np.ascontiguousarray(D.real), basis.dimension)


def expand_operator(X, basis: LieBasis, tol: float = TOL_DERIVED):
    """Split a Hermitian operator into ``(tr(X)/N, [tr(X L_m)]_m)``."""
    X = np.asarray(X, dtype=complex)
    N = basis.dimension
    if X.shape != (N, N):
        raise ExpansionError(f"operator has shape {X.shape}, basis needs ({N}, {N})")
    residue = float(np.max(np.abs(X - X.conj().T)))
    if residue > tol:
        raise ExpansionError(f"operator is not Hermitian (max residue {residue:.3e})", residue)
    trace_part, coeffs = expand_complex(X, basis)
    return float(trace_part.real), coeffs.real.copy()


def expand_complex(X, basis: LieBasis):
    """Expansion of an arbitrary (possibly non-Hermitian) operator; complex coefficients."""
    X = np.asarray(X, dtype=complex)
    N = basis.dimension
    if X.shape != (N, N):
        raise ExpansionError(f"operator has shape {X.shape}, basis needs ({N}, {N})")
    coeffs = np.einsum("ab,mba->m", X, basis.matrices)
    return np.trace(X) / N, coeffs
