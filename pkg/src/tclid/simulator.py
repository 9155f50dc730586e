"""Piecewise-constant propagation of the coherence vector, and a dense oracle.

Within interval ``kappa`` the rates are constant, so the affine system is
solved exactly:

    x(kappa+1) = exp(A dt) x(kappa) + int_0^dt exp(A s) ds b

Both terms come from one exponential of the augmented generator
``[[A, b], [0, 0]]``, which avoids inverting ``A`` (singular whenever the
rates vanish, since ``Q`` is antisymmetric).

:func:`dense_evolve` integrates the master equation itself on the N x N
density matrix with classical RK4 and shares nothing with the coherence-vector
path except the channel/Hamiltonian definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, ModelError
from .model import GeneratorMatrices, ReducedModel, evaluate_A, evaluate_b


def as_generator(system) -> GeneratorMatrices:
    if isinstance(system, ReducedModel):
        return system.generator
    if isinstance(system, GeneratorMatrices):
        return system
    raise TypeError(f"expected GeneratorMatrices or ReducedModel, got {type(system).__name__}")


@dataclass(frozen=True)
class DampingSchedule:
    """Piecewise-constant complex rates, one row per sampling interval.

    ``values[kappa, p]`` is the rate of channel ``p`` on
    ``[kappa*dt, (kappa+1)*dt)``; there are ``K - 1`` rows for ``K`` samples.
    """

    dt: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DimensionMismatchError("schedule values must be (K-1, P)")
        if not self.dt > 0:
            raise ValueError(f"interval width must be positive, got {self.dt}")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.shape[0] + 1

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def t_start(self) -> np.ndarray:
        return self.dt * np.arange(self.K - 1)

    @property
    def t_mid(self) -> np.ndarray:
        return self.dt * (np.arange(self.K - 1) + 0.5)

    @classmethod
    def from_function(cls, func, dt, K, n_channels=1):
        """Sample ``func(t)`` at interval midpoints ``(kappa + 1/2) dt``."""
        t = dt * (np.arange(K - 1) + 0.5)
        vals = np.asarray([func(tk) for tk in t], dtype=complex).reshape(K - 1, -1)
        if vals.shape[1] == 1 and n_channels > 1:
            vals = np.repeat(vals, n_channels, axis=1)
        return cls(dt, vals)

    def with_values(self, values) -> "DampingSchedule":
        return replace(self, values=np.array(values, dtype=complex))

    def rate_at(self, t: float) -> np.ndarray:
        """Right-continuous step-function value at time ``t``."""
        idx = int(np.clip(np.floor(t / self.dt), 0, self.K - 2))
        return self.values[idx]


@dataclass(frozen=True)
class TraceRecord:
    """Output samples ``y(kappa)`` at ``t = kappa * dt`` plus the initial state."""

    times: np.ndarray
    y: np.ndarray
    x0: np.ndarray
    noise_sigma: float = 0.0
    states: np.ndarray = field(default=None, repr=False)
    labels: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != t.shape[0]:
            raise DimensionMismatchError(f"{t.shape[0]} times but {y.shape[0]} output rows")
        if not np.all(np.isfinite(y)):
            raise ValueError("trace contains non-finite outputs")
        if t.size > 2 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=1e-12):
            raise ValueError("sample times must be equally spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"y_{i + 1}" for i in range(y.shape[1])))

    @property
    def K(self) -> int:
        return self.times.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.K > 1 else float("nan")


def expm(A) -> np.ndarray:
    """Matrix exponential (Pade scaling and squaring; accepts stacked input)."""
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expm needs square matrices, got shape {A.shape}")
    return scipy.linalg.expm(A)


def augmented_generator(A, b):
    """``[[A, b], [0, 0]]``; its exponential times ``dt`` holds ``exp(A dt)`` and ``g``."""
    n = A.shape[-1]
    out = np.zeros(A.shape[:-2] + (n + 1, n + 1))
    out[..., :n, :n] = A
    out[..., :n, n] = b
    return out


def interval_propagator(A, b, dt):
    """Return ``(exp(A dt), int_0^dt exp(A s) ds b)`` for one interval (or a stack)."""
    n = A.shape[-1]
    E = expm(augmented_generator(A, b) * dt)
    return E[..., :n, :n], E[..., :n, n]


def step(gen, gamma_row, dt, x):
    """Advance the coherence vector across one constant-rate interval."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    gen = as_generator(gen)
    Phi, g = interval_propagator(evaluate_A(gen, gamma_row), evaluate_b(gen, gamma_row), dt)
    return Phi @ np.asarray(x, dtype=float) + g


def interval_generators(gen: GeneratorMatrices, schedule: DampingSchedule):
    """Stacked ``A(kappa)`` and ``b(kappa)`` for every interval."""
    if schedule.n_channels != gen.n_channels:
        raise DimensionMismatchError(
            f"schedule has {schedule.n_channels} channels, model has {gen.n_channels}"
        )
    re = schedule.values.real
    im = schedule.values.imag
    A = gen.Q[None] + np.einsum("kp,pij->kij", re, gen.E_R) + np.einsum("kp,pij->kij", im, gen.E_I)
    b = re @ gen.F_R + im @ gen.F_I
    return A, b


def propagate_states(gen, schedule: DampingSchedule, x0):
    """States ``x(0..K-1)``, shape (K, n)."""
    gen = as_generator(gen)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (gen.n_states,):
        raise DimensionMismatchError(f"x0 has shape {x0.shape}, model needs ({gen.n_states},)")
    X = np.empty((schedule.K, gen.n_states))
    X[0] = x0
    if schedule.K > 1:
        A, b = interval_generators(gen, schedule)
        Phi, g = interval_propagator(A, b, schedule.dt)
        for k in range(schedule.K - 1):
            X[k + 1] = Phi[k] @ X[k] + g[k]
    return X


def propagate(gen, schedule: DampingSchedule, x0, labels=()) -> TraceRecord:
    """Simulate the output trace ``y(kappa) = c x(kappa)``, kappa = 0..K-1."""
    gen = as_generator(gen)
    X = propagate_states(gen, schedule, x0)
    times = schedule.dt * np.arange(schedule.K)
    return TraceRecord(times, X @ gen.c.T, X[0], 0.0, X, tuple(labels))


def add_noise(trace: TraceRecord, sigma: float, seed=None) -> TraceRecord:
    """I.i.d. Gaussian noise on every output sample; ``sigma = 0`` is the identity."""
    if sigma < 0:
        raise ValueError("noise standard deviation must be non-negative")
    if sigma == 0:
        return trace
    rng = np.random.default_rng(seed)
    y = trace.y + rng.normal(0.0, sigma, size=trace.y.shape)
    return replace(trace, y=y, noise_sigma=float(sigma))


@dataclass(frozen=True)
class DenseTrajectory:
    times: np.ndarray
    expectations: np.ndarray
    rhos: np.ndarray = field(default=None, repr=False)


def _superop_left_right(Lop, Rop):
    """Column-stacked vec(L X R) = (R^T kron L) vec(X)."""
    return np.kron(Rop.T, Lop)


def _pair_superop(A, B):
    Bd = B.conj().T
    BdA = Bd @ A
    n = A.shape[0]
    eye = np.eye(n)
    return _superop_left_right(A, Bd) - 0.5 * (_superop_left_right(BdA, eye) + _superop_left_right(eye, BdA))


def _channel_superops(channel):
    """``(S_R, S_I)`` with dissipator superoperator ``Re(g) S_R + Im(g) S_I``."""
    n = channel.terms[0][0].shape[0]
    S_R = np.zeros((n * n, n * n), dtype=complex)
    S_I = np.zeros((n * n, n * n), dtype=complex)
    for A, B in channel.terms:
        if np.array_equal(A, B):
            S_R += _pair_superop(A, A)
        else:
            ab, ba = _pair_superop(A, B), _pair_superop(B, A)
            S_R += ab + ba
            S_I += 1j * (ab - ba)
    return S_R, S_I


def dense_evolve(H, channels, rates, rho0, T, dt_fine=None, sample_dt=1.0, observables=()):
    """RK4 integration of ``drho/dt = -i[H, rho] + sum_p L_gamma_p rho``.

    Parameters
    ----------
    H : (N, N) Hermitian array
    channels : sequence of :class:`~tclid.model.Channel`
    rates : DampingSchedule or callable
        A schedule is applied as a step function, holding row ``kappa`` over
        the whole of ``[kappa*sample_dt, (kappa+1)*sample_dt)`` (the schedule's
        ``dt`` must equal ``sample_dt``).  A callable ``t -> (P,) complex`` is
        evaluated at the RK4 stage times.
    rho0 : (N, N) density matrix
    T : float
        Horizon; samples are taken at ``kappa * sample_dt < T + tiny``.
    dt_fine : float, optional
        RK4 step, default ``sample_dt / 1000``; must divide ``sample_dt``.
    observables : sequence of (N, N) arrays
        Expectation values ``tr(O rho)`` are recorded at every sample.
    """
    H = np.asarray(H, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    n = H.shape[0]
    if rho0.shape != (n, n):
        raise DimensionMismatchError("rho0 and H dimensions differ")
    if (
        np.max(np.abs(rho0 - rho0.conj().T)) > 1e-10
        or abs(np.trace(rho0) - 1) > 1e-10
        or np.min(np.linalg.eigvalsh(rho0)) < -1e-10
    ):
        raise ModelError("rho0 is not a density matrix")
    if dt_fine is None:
        dt_fine = sample_dt / 1000.0
    n_sub = int(round(sample_dt / dt_fine))
    if n_sub < 1 or abs(n_sub * dt_fine - sample_dt) > 1e-9 * sample_dt:
        raise ValueError("dt_fine must divide sample_dt")
    h = sample_dt / n_sub
    K = int(np.floor(T / sample_dt + 1e-9)) + 1
    if isinstance(rates, DampingSchedule):
        if abs(rates.dt - sample_dt) > 1e-12 * sample_dt:
            raise ValueError("schedule interval must equal sample_dt")
        if rates.K < K:
            raise DimensionMismatchError(f"schedule covers {rates.K} samples, horizon needs {K}")

    eye = np.eye(n)
    L0 = -1j * (_superop_left_right(H, eye) - _superop_left_right(eye, H))
    superops = [_channel_superops(ch) for ch in channels]

    def liouvillian(gamma):
        g = np.asarray(gamma, dtype=complex).reshape(-1)
        L = L0.copy()
        for gp, (S_R, S_I) in zip(g, superops):
            L += gp.real * S_R + gp.imag * S_I
        return L

    obs = [np.asarray(o, dtype=complex) for o in observables]
    v = rho0.reshape(-1, order="F").copy()
    rhos = np.empty((K, n, n), dtype=complex)
    rhos[0] = rho0
    for k in range(K - 1):
        t0 = k * sample_dt
        if isinstance(rates, DampingSchedule):
            L = liouvillian(rates.values[k])
            for _ in range(n_sub):
                k1 = L @ v
                k2 = L @ (v + 0.5 * h * k1)
                k3 = L @ (v + 0.5 * h * k2)
                k4 = L @ (v + h * k3)
                v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            for i in range(n_sub):
                t = t0 + i * h
                La = liouvillian(rates(t))
                Lm = liouvillian(rates(t + 0.5 * h))
                Lb = liouvillian(rates(t + h))
                k1 = La @ v
                k2 = Lm @ (v + 0.5 * h * k1)
                k3 = Lm @ (v + 0.5 * h * k2)
                k4 = Lb @ (v + h * k3)
                v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rhos[k + 1] = v.reshape(n, n, order="F")
    times = sample_dt * np.arange(K)
    expectations = np.array([[np.trace(o @ r).real for o in obs] for r in rhos]).reshape(K, len(obs))
    return DenseTrajectory(times, expectations, rhos)
