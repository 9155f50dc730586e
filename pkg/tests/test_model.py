import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tclid.errors import ModelError
from tclid.model import (
    Channel,
    SpinChainModel,
    accessible_set,
    assemble_generator,
    evaluate_A,
    evaluate_b,
    pair_generators,
)
from tclid.scenarios import TWO_QUBIT_ORDER, two_qubit_model, two_qubit_reduced
from tclid.simulator import DampingSchedule, propagate_states
from tclid.su_algebra import build_basis, pauli_basis, pauli_operator, structure_constants


def display_matrix(gamma, w1, w2, g):
    return np.array(
        [
            [-gamma, 0, 0, -g, g, 0],
            [0, -gamma, 0, g, -g, 0],
            [0, 0, -gamma, -w2, -w1, 0],
            [g, -g, w2, -gamma, 0, -w1],
            [-g, g, w1, 0, -gamma, -w2],
            [0, 0, 0, w1, w2, -gamma],
        ]
    )


def direct_generator(model, gamma):
    """``A[n,p] = tr(L_n Lcal(L_p))`` and ``b[n] = tr(L_n Lcal(I/N))`` by brute force."""
    L = model.basis.matrices
    N = model.basis.dimension
    H = model.hamiltonian

    def lcal(rho):
        out = -1j * (H @ rho - rho @ H)
        for ch, g in zip(model.channels, gamma):
            out = out + ch.dissipator(g, rho)
        return out

    A = np.array([[np.trace(Ln @ lcal(Lp)) for Lp in L] for Ln in L])
    b = np.array([np.trace(Ln @ lcal(np.eye(N) / N)) for Ln in L])
    assert np.max(np.abs(A.imag)) < 1e-12 and np.max(np.abs(b.imag)) < 1e-12
    return A.real, b.real


def random_hermitian(rng, N):
    X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    X = X + X.conj().T
    return X - np.trace(X) / N * np.eye(N)


def random_model(rng, N, n_channels):
    basis = build_basis(N)
    channels = []
    for p in range(n_channels):
        A = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        A -= np.trace(A) / N * np.eye(N)
        if p % 2 == 0:
            channels.append(Channel(f"ch{p}", ((A, A),)))
        else:
            B = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
            B -= np.trace(B) / N * np.eye(N)
            channels.append(Channel(f"ch{p}", ((A, B),)))
    obs = np.diag(np.arange(N, dtype=float))
    obs -= np.trace(obs) / N * np.eye(N)
    return SpinChainModel.from_operators(basis, random_hermitian(rng, N), channels, {"O": obs})


@pytest.mark.parametrize("N", [2, 3, 4])
def test_pair_generators_match_superoperator(N):
    basis = build_basis(N)
    sc = structure_constants(basis)
    rng = np.random.default_rng(N)
    pairs = [(j, k) for j in range(basis.M) for k in range(j, basis.M)]
    for idx in rng.choice(len(pairs), size=min(12, len(pairs)), replace=False):
        j, k = pairs[idx]
        model = SpinChainModel(basis, np.zeros(basis.M), (Channel.from_indices(basis, j, k),), np.eye(basis.M)[:1], ("L0",))
        E_R, E_I, F = pair_generators(sc, j, k)
        A1, b1 = direct_generator(model, [1.0])
        np.testing.assert_allclose(A1, E_R, atol=1e-12)
        np.testing.assert_allclose(b1, 0.0, atol=1e-12)
        if j != k:
            Ai, bi = direct_generator(model, [1j])
            np.testing.assert_allclose(Ai, E_I, atol=1e-12)
            np.testing.assert_allclose(bi, F, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(N=st.integers(2, 4), P=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_assembled_generator_matches_superoperator(N, P, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, N, P)
    gen = assemble_generator(model)
    gamma = rng.normal(size=P) + 1j * rng.normal(size=P)
    A, b = direct_generator(model, gamma)
    np.testing.assert_allclose(evaluate_A(gen, gamma), A, atol=1e-10)
    np.testing.assert_allclose(evaluate_b(gen, gamma), b, atol=1e-10)


def test_hamiltonian_part_antisymmetric():
    rng = np.random.default_rng(0)
    gen = assemble_generator(random_model(rng, 4, 1))
    np.testing.assert_allclose(gen.Q, -gen.Q.T, atol=1e-12)


def test_zero_dynamics():
    basis = build_basis(3)
    model = SpinChainModel(basis, np.zeros(8), (Channel.from_indices(basis, 0, 1),), np.eye(8)[:1], ("L0",))
    gen = assemble_generator(model)
    assert np.all(evaluate_A(gen, [0.0]) == 0)
    assert np.all(evaluate_b(gen, [0.0]) == 0)


def test_gamma_zero_gives_Q():
    gen = assemble_generator(random_model(np.random.default_rng(1), 3, 2))
    np.testing.assert_array_equal(evaluate_A(gen, [0, 0]), gen.Q)


def test_affine_linearity():
    rng = np.random.default_rng(2)
    gen = assemble_generator(random_model(rng, 3, 2))
    g1 = rng.normal(size=2) + 1j * rng.normal(size=2)
    g2 = rng.normal(size=2) + 1j * rng.normal(size=2)
    resid = evaluate_A(gen, g1 + g2) - evaluate_A(gen, g1) - evaluate_A(gen, g2) + gen.Q
    assert np.max(np.abs(resid)) < 1e-12


def test_diagonal_channels_real_rate_no_drift():
    basis = build_basis(3)
    chans = tuple(Channel.from_indices(basis, j, j) for j in (0, 4, 7))
    gen = assemble_generator(SpinChainModel(basis, np.zeros(8), chans, np.eye(8)[:1], ("L0",)))
    assert gen.diagonal.all()
    np.testing.assert_array_equal(evaluate_b(gen, [0.3, 0.1, 2.0]), np.zeros(8))


def test_imaginary_rate_drift_linear():
    basis = build_basis(2)
    gen = assemble_generator(
        SpinChainModel(basis, np.zeros(3), (Channel.from_indices(basis, 0, 1),), np.eye(3)[2:], ("Z",))
    )
    np.testing.assert_allclose(evaluate_b(gen, [0.3j]), 0.3 * gen.F_I[0], atol=1e-15)
    assert np.linalg.norm(gen.F_I[0]) > 0


def test_single_qubit_amplitude_damping_spectrum():
    basis = pauli_basis(1)
    model = SpinChainModel.from_operators(
        basis, np.zeros((2, 2)), [Channel.from_operator("decay", pauli_operator("-"))], {"Z": pauli_operator("Z")}
    )
    gen = assemble_generator(model)
    gamma = 0.37
    ev = np.sort(np.linalg.eigvals(evaluate_A(gen, [gamma])).real)
    np.testing.assert_allclose(ev, [-gamma, -gamma / 2, -gamma / 2], atol=1e-14)
    A, b = direct_generator(model, [gamma])
    np.testing.assert_allclose(evaluate_b(gen, [gamma]), b, atol=1e-14)


@pytest.mark.parametrize("gamma", [0.0, 0.1, 1.0])
def test_two_qubit_display(gamma):
    red = two_qubit_reduced(two_qubit_model())
    gen = red.generator
    np.testing.assert_array_equal(evaluate_A(gen, [gamma]), display_matrix(gamma, 1.5, 1.5, 1.0))
    np.testing.assert_array_equal(evaluate_b(gen, [gamma]), [-gamma, -gamma, 0, 0, 0, 0])
    np.testing.assert_array_equal(gen.c, [[1, 0, 0, 0, 0, 0]])


def test_two_qubit_display_distinct_frequencies():
    red = two_qubit_reduced(two_qubit_model(omega1=1.25, omega2=2.0, g=0.5))
    np.testing.assert_allclose(
        evaluate_A(red.generator, [0.2]), display_matrix(0.2, 1.25, 2.0, 0.5), atol=1e-14
    )


def test_two_qubit_accessible_set():
    model = two_qubit_model()
    red = accessible_set(model)
    assert {model.basis.labels[i] for i in red.kept_indices} == set(TWO_QUBIT_ORDER)


def test_reduction_consistent_with_full_dynamics():
    model = two_qubit_model(omega1=1.1, omega2=1.9, g=0.7)
    gen = assemble_generator(model)
    red = accessible_set(model, gen)
    idx = list(red.kept_indices)
    gamma = [0.25]
    A_full, b_full = evaluate_A(gen, gamma), evaluate_b(gen, gamma)
    rest = [i for i in range(gen.n_states) if i not in idx]
    # the kept block does not feel the discarded coordinates
    assert np.max(np.abs(A_full[np.ix_(idx, rest)])) < 1e-14
    np.testing.assert_allclose(evaluate_A(red.generator, gamma), A_full[np.ix_(idx, idx)])
    np.testing.assert_allclose(evaluate_b(red.generator, gamma), b_full[idx])


def test_accessible_set_static_observable():
    basis = pauli_basis(1)
    model = SpinChainModel.from_operators(basis, pauli_operator("Z"), [], {"Z": pauli_operator("Z")})
    red = accessible_set(model)
    assert red.kept_indices == (basis.index("Z"),)


def test_accessible_set_full_support():
    basis = build_basis(2)
    model = SpinChainModel(basis, np.zeros(3), (), np.array([[1.0, 1.0, 1.0]]), ("O",))
    assert accessible_set(model).kept_indices == (0, 1, 2)


def test_empty_support_rejected():
    basis = build_basis(2)
    model = SpinChainModel(basis, np.zeros(3), (), np.zeros((1, 3)), ("O",))
    with pytest.raises(ModelError):
        accessible_set(model)


def test_channel_index_out_of_range():
    with pytest.raises(ModelError):
        Channel.from_indices(build_basis(2), 0, 3)


def test_noncommuting_observables_rejected():
    with pytest.raises(ModelError):
        SpinChainModel.from_operators(
            pauli_basis(1), np.zeros((2, 2)), [], {"X": pauli_operator("X"), "Z": pauli_operator("Z")}
        )


def test_too_many_observables_rejected():
    basis = build_basis(2)
    with pytest.raises(ModelError):
        SpinChainModel(basis, np.zeros(3), (), np.eye(3), ("a", "b", "c"))


def test_reduced_trajectories_match_full():
    rng = np.random.default_rng(8)
    model = two_qubit_model(omega1=1.4, omega2=1.6, g=0.9)
    gen = assemble_generator(model)
    red = accessible_set(model, gen)
    for _ in range(3):
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi)
        x0 = model.coherence_vector(rho)
        sched = DampingSchedule(0.7, rng.uniform(-0.02, 0.2, size=(30, 1)))
        X_full = propagate_states(gen, sched, x0)
        X_red = propagate_states(red.generator, sched, red.reduce_state(x0))
        np.testing.assert_allclose(X_full[:, list(red.kept_indices)], X_red, atol=1e-9)
        np.testing.assert_allclose(X_full @ gen.c.T, X_red @ red.generator.c.T, atol=1e-9)
