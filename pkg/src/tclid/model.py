"""Coherence-vector form of the TCL master equation.

With ``rho = I/N + sum_n x_n L_n`` the master equation becomes the affine
system ``dx/dt = A(gamma) x + b(gamma)``, ``y = c x``.  Both ``A`` and ``b`` are
affine in the real and imaginary parts of every channel rate, so the
assembly stores one matrix (``E_R``, ``E_I``) and one vector (``F_R``,
``F_I``) per channel and part:

    A(gamma) = Q + sum_p Re(gamma_p) E_R[p] + Im(gamma_p) E_I[p]
    b(gamma) =     sum_p Re(gamma_p) F_R[p] + Im(gamma_p) F_I[p]

Channels
--------
A channel is a labelled group of jump-operator pairs ``(A, B)`` sharing one
complex rate ``gamma``.  A pair with ``A == B`` contributes
``Re(gamma) * D[A, A]``; a pair with ``A != B`` contributes the Hermitian
completion ``gamma * D[A, B] + conj(gamma) * D[B, A]``, where
``D[A, B] rho = A rho B^dag - {B^dag A, rho} / 2``.  The basis-index channel
``(j, k)`` is the pair ``(L_j, L_k)``; ``j == k`` channels are real.

Indices are 0-based throughout the Python API.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ModelError
from .su_algebra import (
    TOL_DERIVED,
    LieBasis,
    StructureConstants,
    expand_complex,
    expand_operator,
    structure_constants,
)

PATTERN_TOL = 1e-12


@dataclass(frozen=True)
class Channel:
    """A labelled group of jump-operator pairs that share one rate."""

    label: str
    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ModelError(f"channel {self.label!r} has no terms")
        terms = tuple(
            (np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)) for a, b in self.terms
        )
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_operator(cls, label, op):
        return cls(label, ((op, op),))

    @classmethod
    def from_indices(cls, basis: LieBasis, j: int, k: int, label=None):
        if not (0 <= j < basis.M and 0 <= k < basis.M):
            raise ModelError(f"channel index ({j}, {k}) outside 0..{basis.M - 1}")
        if j > k:
            raise ModelError(f"channel indices must satisfy j <= k, got ({j}, {k})")
        label = label or f"{basis.labels[j]}:{basis.labels[k]}"
        return cls(label, ((basis[j], basis[k]),))

    @property
    def diagonal(self) -> bool:
        """True when every pair has ``A == B``; the rate is then real."""
        return all(np.array_equal(a, b) for a, b in self.terms)

    def rate_matrices(self, basis: LieBasis):
        """Hermitian ``(G_R, G_I)`` with basis rate matrix ``Re(g) G_R + Im(g) G_I``."""
        M = basis.M
        G_R = np.zeros((M, M), dtype=complex)
        G_I = np.zeros((M, M), dtype=complex)
        for A, B in self.terms:
            ta, a = expand_complex(A, basis)
            tb, b = expand_complex(B, basis)
            if abs(ta) > TOL_DERIVED or abs(tb) > TOL_DERIVED:
                raise ModelError(f"channel {self.label!r}: jump operators must be traceless")
            if np.array_equal(A, B):
                G_R += np.outer(a, a.conj())
            else:
                ab = np.outer(a, b.conj())
                ba = np.outer(b, a.conj())
                G_R += ab + ba
                G_I += 1j * (ab - ba)
        return G_R, G_I

    def dissipator(self, gamma, rho):
        """Direct action on a density matrix (used by the dense integrator)."""
        out = np.zeros_like(rho, dtype=complex)
        for A, B in self.terms:
            if np.array_equal(A, B):
                out += np.real(gamma) * _lindblad_pair(A, A, rho)
            else:
                out += gamma * _lindblad_pair(A, B, rho) + np.conj(gamma) * _lindblad_pair(B, A, rho)
        return out


def _lindblad_pair(A, B, rho):
    Bd = B.conj().T
    BdA = Bd @ A
    return A @ rho @ Bd - 0.5 * (BdA @ rho + rho @ BdA)


@dataclass(frozen=True)
class SpinChainModel:
    """Everything that defines the coherence-vector system except the rates.

    Attributes
    ----------
    basis : LieBasis
    h : ndarray, shape (M,)
        Hamiltonian coefficients ``tr(H L_m)`` in GHz (angular frequency).
    channels : tuple of Channel
    c : ndarray, shape (S, M)
        Observable expansion coefficients, one row per measured observable.
    observable_labels : tuple of str
    """

    basis: LieBasis
    h: np.ndarray
    channels: tuple
    c: np.ndarray
    observable_labels: tuple
    structure: StructureConstants = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        M = self.basis.M
        h = np.asarray(self.h, dtype=float)
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if h.shape != (M,):
            raise ModelError(f"h must have length {M}, got shape {h.shape}")
        if c.shape[1] != M:
            raise ModelError(f"observable matrix needs {M} columns, got {c.shape[1]}")
        S = c.shape[0]
        if S >= M:
            raise ModelError(f"need fewer observables than basis elements (S={S}, M={M})")
        if len(self.observable_labels) != S:
            raise ModelError("one label per observable row required")
        for ch in self.channels:
            for A, B in ch.terms:
                if A.shape != (self.basis.dimension,) * 2 or B.shape != A.shape:
                    raise ModelError(f"channel {ch.label!r}: operator shape mismatch")
        ops = [self.basis.reconstruct(0.0, row) for row in c]
        for i in range(S):
            for j in range(i + 1, S):
                comm = ops[i] @ ops[j] - ops[j] @ ops[i]
                if np.abs(comm).sum() > TOL_DERIVED:
                    raise ModelError(
                        f"observables {self.observable_labels[i]!r} and "
                        f"{self.observable_labels[j]!r} do not commute"
                    )
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "observable_labels", tuple(self.observable_labels))
        if self.structure is None:
            object.__setattr__(self, "structure", structure_constants(self.basis))

    @classmethod
    def from_operators(cls, basis, hamiltonian, channels, observables):
        """Build from an N x N Hamiltonian and a ``{label: operator}`` mapping."""
        _, h = expand_operator(hamiltonian, basis)
        labels = tuple(observables)
        rows = []
        for lab in labels:
            _, row = expand_operator(observables[lab], basis)
            rows.append(row)
        return cls(basis, h, tuple(channels), np.array(rows), labels)

    @property
    def hamiltonian(self):
        return self.basis.reconstruct(0.0, self.h)

    @property
    def observable_operators(self):
        return [self.basis.reconstruct(0.0, row) for row in self.c]

    def coherence_vector(self, rho):
        _, x = expand_operator(rho, self.basis)
        return x


@dataclass(frozen=True)
class GeneratorMatrices:
    """Affine decomposition of ``A(gamma)`` and ``b(gamma)`` plus output map.

    ``coord_scale`` records a uniform rescaling ``z = s x`` of the state
    (``b`` and ``F`` scale by ``s``, ``c`` by ``1/s``, ``A`` is unchanged).
    """

    Q: np.ndarray
    E_R: np.ndarray
    E_I: np.ndarray
    F_R: np.ndarray
    F_I: np.ndarray
    c: np.ndarray
    diagonal: np.ndarray
    state_labels: tuple
    channel_labels: tuple
    coord_scale: float = 1.0

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    @property
    def n_channels(self) -> int:
        return self.E_R.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.c.shape[0]

    def evaluate_A(self, gamma_row):
        return evaluate_A(self, gamma_row)

    def evaluate_b(self, gamma_row):
        return evaluate_b(self, gamma_row)

    def rescaled(self, s: float) -> "GeneratorMatrices":
        return replace(
            self,
            F_R=self.F_R * s,
            F_I=self.F_I * s,
            c=self.c / s,
            coord_scale=self.coord_scale * s,
        )


def pair_generators(sc: StructureConstants, j: int, k: int):
    """``(E_R, E_I, F)`` for the basis-index channel ``(j, k)``, ``j <= k``.

    Elementwise::

        E_R[n,p] = -(2 - delta_jk)/4 * sum_l (C[j,l,n] C[k,l,p] + C[k,l,n] C[j,l,p])
        E_I[n,p] =  1/2 * sum_l (C[k,l,n] D[j,l,p] - C[j,l,n] D[k,l,p])
        F[n]     = -(2/N) C[j,k,n]
    """
    C, D = sc.C, sc.D
    weight = 1.0 if j == k else 2.0
    E_R = -0.25 * weight * (C[j].T @ C[k] + C[k].T @ C[j])
    E_I = 0.5 * (C[k].T @ D[j] - C[j].T @ D[k])
    F = -(2.0 / sc.dimension) * C[j, k]
    return E_R, E_I, F


def rate_matrix_generators(sc: StructureConstants, G):
    """``(E, F)`` contributed by a Hermitian basis rate matrix ``G`` (``gamma = 1``)."""
    C, D = sc.C, sc.D
    G = np.asarray(G, dtype=complex)
    E = -0.5 * np.einsum("jk,jln,klp->np", G.real, C, C, optimize=True)
    E += 0.5 * np.einsum("jk,kln,jlp->np", G.imag, C, D, optimize=True)
    F = -(1.0 / sc.dimension) * np.einsum("jk,jkn->n", G.imag, C)
    return E, F


def hamiltonian_generator(sc: StructureConstants, h):
    """``Q[n,p] = sum_m h_m C[m,p,n]`` (antisymmetric)."""
    return np.einsum("m,mpn->np", np.asarray(h, dtype=float), sc.C)


def assemble_generator(model: SpinChainModel) -> GeneratorMatrices:
    """Assemble ``Q`` and the per-channel ``E_R, E_I, F_R, F_I`` of ``model``."""
    sc = model.structure
    M = model.basis.M
    P = len(model.channels)
    E_R = np.zeros((P, M, M))
    E_I = np.zeros((P, M, M))
    F_R = np.zeros((P, M))
    F_I = np.zeros((P, M))
    for p, ch in enumerate(model.channels):
        G_R, G_I = ch.rate_matrices(model.basis)
        E_R[p], F_R[p] = rate_matrix_generators(sc, G_R)
        E_I[p], F_I[p] = rate_matrix_generators(sc, G_I)
    return GeneratorMatrices(
        Q=hamiltonian_generator(sc, model.h),
        E_R=E_R,
        E_I=E_I,
        F_R=F_R,
        F_I=F_I,
        c=model.c.copy(),
        diagonal=np.array([ch.diagonal for ch in model.channels], dtype=bool),
        state_labels=model.basis.labels,
        channel_labels=tuple(ch.label for ch in model.channels),
    )


def _gamma_parts(gen, gamma_row):
    g = np.asarray(gamma_row, dtype=complex).reshape(-1)
    if g.shape[0] != gen.n_channels:
        raise ModelError(f"expected {gen.n_channels} channel rates, got {g.shape[0]}")
    if not np.all(np.isfinite(g)):
        raise ModelError("non-finite damping rate")
    return g.real, g.imag


def evaluate_A(gen: GeneratorMatrices, gamma_row) -> np.ndarray:
    re, im = _gamma_parts(gen, gamma_row)
    return gen.Q + np.tensordot(re, gen.E_R, axes=1) + np.tensordot(im, gen.E_I, axes=1)


def evaluate_b(gen: GeneratorMatrices, gamma_row) -> np.ndarray:
    re, im = _gamma_parts(gen, gamma_row)
    return re @ gen.F_R + im @ gen.F_I


@dataclass(frozen=True)
class ReducedModel:
    """Restriction of a generator to a closed subset of coherence-vector entries."""

    kept_indices: tuple
    generator: GeneratorMatrices
    full_dimension: int

    def reduce_state(self, x_full):
        """Map a full coherence vector to the (rescaled) reduced state."""
        x_full = np.asarray(x_full, dtype=float)
        return x_full[list(self.kept_indices)] * self.generator.coord_scale

    def rescaled(self, s: float) -> "ReducedModel":
        return replace(self, generator=self.generator.rescaled(s))


def restrict(gen: GeneratorMatrices, indices) -> ReducedModel:
    """Keep the listed state indices in the given order (no closure check)."""
    idx = [int(i) for i in indices]
    if not idx or len(set(idx)) != len(idx) or min(idx) < 0 or max(idx) >= gen.n_states:
        raise ModelError(f"invalid index selection {indices!r}")
    sub = np.ix_(idx, idx)
    return ReducedModel(
        kept_indices=tuple(idx),
        generator=replace(
            gen,
            Q=gen.Q[sub],
            E_R=gen.E_R[:, idx][:, :, idx],
            E_I=gen.E_I[:, idx][:, :, idx],
            F_R=gen.F_R[:, idx],
            F_I=gen.F_I[:, idx],
            c=gen.c[:, idx],
            state_labels=tuple(gen.state_labels[i] for i in idx),
        ),
        full_dimension=gen.n_states,
    )


def sparsity_pattern(gen: GeneratorMatrices) -> np.ndarray:
    """Union of nonzero patterns of ``Q``, every ``E_R`` and every ``E_I``."""
    pattern = np.abs(gen.Q) > PATTERN_TOL
    pattern |= np.any(np.abs(gen.E_R) > PATTERN_TOL, axis=0)
    pattern |= np.any(np.abs(gen.E_I) > PATTERN_TOL, axis=0)
    return pattern


def accessible_set(model, gen: GeneratorMatrices = None) -> ReducedModel:
    """Smallest index set holding the observable supports and closed under ``A``.

    ``model`` may be a :class:`SpinChainModel` or already a
    :class:`GeneratorMatrices`.  Closure uses the generic-rate sparsity
    pattern, so accidental cancellations at particular rates are ignored.
    """
    if gen is None:
        gen = model if isinstance(model, GeneratorMatrices) else assemble_generator(model)
    support = np.any(np.abs(gen.c) > PATTERN_TOL, axis=0)
    if not support.any():
        raise ModelError("observables have empty support on the basis")
    pattern = sparsity_pattern(gen)
    kept = support.copy()
    frontier = list(np.flatnonzero(kept))
    while frontier:
        n = frontier.pop()
        for p in np.flatnonzero(pattern[n]):
            if not kept[p]:
                kept[p] = True
                frontier.append(p)
    return restrict(gen, np.flatnonzero(kept))
