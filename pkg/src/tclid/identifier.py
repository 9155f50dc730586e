"""Gradient identification of piecewise-constant damping rates.

The objective is ``J = 1/2 sum_kappa ||y(kappa) - y_hat(kappa)||^2`` over the
K samples.  A change of the rates on interval ``kappa`` only moves
``x(kappa+1)`` directly; later states see it through the interval
propagators ``exp(A dt)``.  :func:`gradient` therefore needs, per interval,
the one-step sensitivity ``dx(kappa+1)/d theta`` and the cached propagators.

Two one-step sensitivity modes are provided:

``approximate``
    Assumes ``exp(A s) E exp(-A s) ~ E`` over one interval::

        dx/dRe = dt Phi E_R x + int_0^dt s e^{As} ds E_R b + int_0^dt e^{As} ds F_R
        dx/dIm = dt Phi E_I x + int_0^dt s e^{As} ds E_I b + int_0^dt e^{As} ds F_I

    The two integrals come from a single exponential of
    ``dt * [[A, I, 0], [0, 0, I], [0, 0, 0]]``.

``exact``
    Differentiates the augmented one-step map ``exp(dt [[A, b], [0, 0]])``
    exactly through the block-triangular exponential
    ``exp(dt [[Maug, dMaug], [0, Maug]])`` (upper-right block).

The downstream propagation is accumulated backwards (adjoint sweep, O(K));
:func:`gradient_forward` keeps the literal per-interval forward products
(O(K^2)) for cross-checking.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, NumericalAbort
from .model import GeneratorMatrices
from .simulator import (
    DampingSchedule,
    TraceRecord,
    as_generator,
    augmented_generator,
    expm,
    interval_generators,
)

logger = logging.getLogger(__name__)

GRAD_MODES = ("approximate", "exact")
STEP_MODES = ("fixed", "adaptive")
APPROX_WARN = 0.5


@dataclass
class IdentificationConfig:
    """Hyperparameters for :func:`identify`.

    Step sizes are the ``eps`` of the update ``Re(g) -> Re(g) - eps_R dJ/dRe(g)``
    (and likewise for the imaginary part).  ``ridge`` adds
    ``ridge/2 * sum |gamma|^2`` to the objective.
    """

    eps_R: float = 0.002
    eps_I: float = 0.002
    max_iters: int = 20000
    J_tol: float = 1e-14
    grad_mode: str = "approximate"
    step_mode: str = "fixed"
    init_schedule: DampingSchedule = None
    real_only: bool = False
    ridge: float = 0.0
    stall_window: int = 50
    stall_rtol: float = 1e-12
    log_every: int = 1000

    def __post_init__(self):
        if not (self.eps_R > 0 and self.eps_I > 0):
            raise ValueError("step sizes eps_R and eps_I must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError("max_iters must be an integer >= 1")
        if self.grad_mode not in GRAD_MODES:
            raise ValueError(f"grad_mode must be one of {GRAD_MODES}")
        if self.step_mode not in STEP_MODES:
            raise ValueError(f"step_mode must be one of {STEP_MODES}")
        if self.ridge < 0:
            raise ValueError("ridge weight must be non-negative")


@dataclass
class GradientWorkspace:
    """Forward-sweep cache for one schedule."""

    schedule: DampingSchedule
    A: np.ndarray
    b: np.ndarray
    Phi: np.ndarray
    W1: np.ndarray  # int_0^dt e^{As} ds
    W2: np.ndarray  # int_0^dt (dt - s) e^{As} ds
    states: np.ndarray
    residuals: np.ndarray


@dataclass
class IdentificationResult:
    schedule: DampingSchedule
    J_history: np.ndarray
    grad_norm_history: np.ndarray
    termination: str
    iterations_run: int
    final_J: float
    eps_history: np.ndarray = field(default=None, repr=False)
    wall_time: float = 0.0


def _check_target(gen: GeneratorMatrices, schedule: DampingSchedule, target: TraceRecord):
    if target.K != schedule.K:
        raise DimensionMismatchError(f"target has {target.K} samples, schedule implies {schedule.K}")
    if target.y.shape[1] != gen.n_outputs:
        raise DimensionMismatchError(
            f"target has {target.y.shape[1]} outputs, model has {gen.n_outputs}"
        )
    if schedule.n_channels != gen.n_channels:
        raise DimensionMismatchError(
            f"schedule has {schedule.n_channels} channels, model has {gen.n_channels}"
        )


def _integral_blocks(A, dt):
    """``exp(dt A)``, ``int_0^dt e^{As} ds`` and ``int_0^dt (dt-s) e^{As} ds`` (stacked)."""
    n = A.shape[-1]
    big = np.zeros(A.shape[:-2] + (3 * n, 3 * n))
    eye = np.eye(n)
    big[..., :n, :n] = A
    big[..., :n, n : 2 * n] = eye
    big[..., n : 2 * n, 2 * n :] = eye
    E = expm(big * dt)
    return E[..., :n, :n], E[..., :n, n : 2 * n], E[..., :n, 2 * n :]


def forward_sweep(gen, schedule: DampingSchedule, x0, target: TraceRecord = None) -> GradientWorkspace:
    """Simulate once and cache every per-interval quantity the gradient needs."""
    gen = as_generator(gen)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (gen.n_states,):
        raise DimensionMismatchError(f"x0 has shape {x0.shape}, model needs ({gen.n_states},)")
    if target is not None:
        _check_target(gen, schedule, target)
    n = gen.n_states
    K = schedule.K
    if K > 1:
        A, b = interval_generators(gen, schedule)
        Phi, W1, W2 = _integral_blocks(A, schedule.dt)
    else:
        A = np.zeros((0, n, n))
        b = np.zeros((0, n))
        Phi = W1 = W2 = A
    X = np.empty((K, n))
    X[0] = x0
    for k in range(K - 1):
        X[k + 1] = Phi[k] @ X[k] + W1[k] @ b[k]
    residuals = None
    if target is not None:
        residuals = X @ gen.c.T - target.y
    return GradientWorkspace(schedule, A, b, Phi, W1, W2, X, residuals)


def objective(gen, schedule: DampingSchedule, x0, target: TraceRecord, ridge: float = 0.0) -> float:
    """``J = 1/2 sum_kappa ||c x(kappa) - y_hat(kappa)||^2`` (+ optional ridge)."""
    ws = forward_sweep(gen, schedule, x0, target)
    return _objective_from(ws, ridge)


def _objective_from(ws: GradientWorkspace, ridge: float) -> float:
    J = 0.5 * float(np.sum(ws.residuals**2))
    if ridge:
        J += 0.5 * ridge * float(np.sum(np.abs(ws.schedule.values) ** 2))
    return J


def _approx_sensitivities(gen, ws: GradientWorkspace, parts):
    dt = ws.schedule.dt
    X = ws.states[:-1]
    Ws = dt * ws.W1 - ws.W2  # int_0^dt s e^{As} ds
    out = np.zeros((X.shape[0], gen.n_channels, 2, gen.n_states))
    for part in parts:
        E = gen.E_R if part == 0 else gen.E_I
        F = gen.F_R if part == 0 else gen.F_I
        Ex = np.einsum("pij,kj->kpi", E, X)
        Eb = np.einsum("pij,kj->kpi", E, ws.b)
        out[:, :, part] = (
            dt * np.einsum("kij,kpj->kpi", ws.Phi, Ex)
            + np.einsum("kij,kpj->kpi", Ws, Eb)
            + np.einsum("kij,pj->kpi", ws.W1, F)
        )
    return out


def _exact_sensitivities(gen, ws: GradientWorkspace, parts):
    dt = ws.schedule.dt
    n = gen.n_states
    Km1 = ws.A.shape[0]
    P = gen.n_channels
    Maug = augmented_generator(ws.A, ws.b)  # (K-1, n+1, n+1)
    out = np.zeros((Km1, P, 2, n))
    xa = np.concatenate([ws.states[:-1], np.ones((Km1, 1))], axis=1)
    for part in parts:
        E = gen.E_R if part == 0 else gen.E_I
        F = gen.F_R if part == 0 else gen.F_I
        dM = augmented_generator(E, F)  # (P, n+1, n+1)
        m = n + 1
        big = np.zeros((Km1, P, 2 * m, 2 * m))
        big[:, :, :m, :m] = Maug[:, None]
        big[:, :, m:, m:] = Maug[:, None]
        big[:, :, :m, m:] = dM[None]
        dExp = expm(big * dt)[:, :, :m, m:]
        out[:, :, part] = np.einsum("kpij,kj->kpi", dExp[:, :, :n, :], xa)
    return out


def interval_sensitivities(gen, ws: GradientWorkspace, mode="approximate", real_only=False):
    """``dx(kappa+1)/d theta(kappa)``, shape (K-1, P, 2, n); axis 2 is (Re, Im)."""
    gen = as_generator(gen)
    parts = (0,) if real_only else (0, 1)
    if ws.A.shape[0] == 0:
        return np.zeros((0, gen.n_channels, 2, gen.n_states))
    if mode == "approximate":
        return _approx_sensitivities(gen, ws, parts)
    if mode == "exact":
        return _exact_sensitivities(gen, ws, parts)
    raise ValueError(f"unknown gradient mode {mode!r}")


def sensitivity_step(gen, gamma_row, dt, x_kappa, mode="approximate"):
    """One-interval sensitivities ``(dRe, dIm)``, each of shape (P, n)."""
    gen = as_generator(gen)
    sched = DampingSchedule(dt, np.asarray(gamma_row, dtype=complex).reshape(1, -1))
    ws = forward_sweep(gen, sched, x_kappa)
    if mode == "approximate":
        _warn_if_coarse(gen, ws)
    s = interval_sensitivities(gen, ws, mode)[0]
    return s[:, 0], s[:, 1]


def approximation_parameter(gen, ws: GradientWorkspace) -> float:
    """``dt * max ||[A, E]||_2``: the size of the neglected commutator terms."""
    gen = as_generator(gen)
    worst = 0.0
    for A in ws.A:
        for E in np.concatenate([gen.E_R, gen.E_I]):
            comm = A @ E - E @ A
            if comm.any():
                worst = max(worst, float(np.linalg.norm(comm, 2)))
    return ws.schedule.dt * worst


def _warn_if_coarse(gen, ws):
    eta = approximation_parameter(gen, ws)
    if eta > APPROX_WARN:
        warnings.warn(
            f"approximate gradient with dt*||[A,E]|| = {eta:.2f} > {APPROX_WARN}; "
            "consider grad_mode='exact' or a finer grid",
            RuntimeWarning,
            stacklevel=3,
        )


def _pack(gen, grad_parts, schedule, ridge, real_only):
    grad = grad_parts[..., 0] + 1j * grad_parts[..., 1]
    if ridge:
        grad = grad + ridge * schedule.values
    imag_locked = gen.diagonal[None, :] | real_only
    return np.where(imag_locked, grad.real + 0j, grad)


def gradient(gen, schedule, x0, target, mode="approximate", real_only=False, ridge=0.0, workspace=None):
    """``dJ/dRe(gamma) + i dJ/dIm(gamma)`` for every interval and channel, (K-1, P).

    Uses the adjoint recursion ``lam(K-1) = c^T r(K-1)``,
    ``lam(kappa) = c^T r(kappa) + Phi(kappa)^T lam(kappa+1)`` and
    ``dJ/d theta(kappa) = lam(kappa+1) . dx(kappa+1)/d theta(kappa)``.
    """
    gen = as_generator(gen)
    ws = workspace or forward_sweep(gen, schedule, x0, target)
    S = interval_sensitivities(gen, ws, mode, real_only)
    K = schedule.K
    lam = np.zeros((K, gen.n_states))
    if K > 1:
        cr = ws.residuals @ gen.c
        lam[K - 1] = cr[K - 1]
        for k in range(K - 2, 0, -1):
            lam[k] = cr[k] + ws.Phi[k].T @ lam[k + 1]
    parts = np.einsum("kqai,ki->kqa", S, lam[1:])
    return _pack(gen, parts, schedule, ridge, real_only)


def gradient_forward(gen, schedule, x0, target, mode="approximate", real_only=False, ridge=0.0):
    """Same gradient through explicit forward products of the propagators."""
    gen = as_generator(gen)
    ws = forward_sweep(gen, schedule, x0, target)
    S = interval_sensitivities(gen, ws, mode, real_only)
    K = schedule.K
    parts = np.zeros(S.shape[:3])
    for k in range(K - 1):
        v = S[k]  # (P, 2, n): dx(k+1)/d theta(k)
        acc = np.zeros(S.shape[1:3])
        for kp in range(k + 1, K):
            acc += np.einsum("qai,si,s->qa", v, gen.c, ws.residuals[kp])
            if kp < K - 1:
                v = np.einsum("ij,qaj->qai", ws.Phi[kp], v)
        parts[k] = acc
    return _pack(gen, parts, schedule, ridge, real_only)


def _apply_step(schedule, grad, eps_R, eps_I, scale, real_only, diagonal):
    re = schedule.values.real - scale * eps_R * grad.real
    im = schedule.values.imag - scale * eps_I * grad.imag
    if real_only:
        im = np.zeros_like(im)
    else:
        im = np.where(diagonal[None, :], 0.0, im)
    return schedule.with_values(re + 1j * im)


def identify(gen, target: TraceRecord, config: IdentificationConfig, x0=None, callback=None):
    """Gradient descent on the piecewise-constant rates.

    Each iteration simulates the current schedule, evaluates ``J`` and its
    gradient, then updates every interval at once.  Stops after
    ``max_iters`` updates, when ``J <= J_tol``, or when ``J`` has improved by
    less than ``stall_rtol`` (relative) over ``stall_window`` iterations.
    ``callback(iteration, J, grad_norm, eps_scale)`` is called every iteration.
    """
    gen = as_generator(gen)
    if config.init_schedule is None:
        raise ValueError("config.init_schedule is required")
    x0 = target.x0 if x0 is None else np.asarray(x0, dtype=float)
    sched = config.init_schedule
    if config.real_only:
        sched = sched.with_values(sched.values.real + 0j)
    sched = sched.with_values(np.where(gen.diagonal[None, :], sched.values.real + 0j, sched.values))
    t0 = time.perf_counter()

    ws = forward_sweep(gen, sched, x0, target)
    if config.grad_mode == "approximate":
        _warn_if_coarse(gen, ws)
    J = _objective_from(ws, config.ridge)
    J_hist, g_hist, eps_hist = [], [], []
    termination = "max-iters"
    scale = 1.0
    it = 0
    while it < config.max_iters:
        it += 1
        if not np.isfinite(J):
            raise NumericalAbort(f"non-finite objective at iteration {it}")
        grad = gradient(
            gen, sched, x0, target, config.grad_mode, config.real_only, config.ridge, workspace=ws
        )
        gnorm = float(np.sqrt(np.sum(np.abs(grad) ** 2)))
        if not np.isfinite(gnorm):
            raise NumericalAbort(f"non-finite gradient at iteration {it}")
        J_hist.append(J)
        g_hist.append(gnorm)
        eps_hist.append(scale)
        if callback is not None:
            callback(it, J, gnorm, scale)
        if config.log_every and it % config.log_every == 0:
            logger.info("iter %d  J=%.6e  |grad|=%.3e", it, J, gnorm)
        if J <= config.J_tol:
            termination = "J-tol"
            break
        w = config.stall_window
        if len(J_hist) > w:
            ref = J_hist[-w - 1]
            if ref - J <= config.stall_rtol * abs(ref):
                termination = "stalled"
                break

        if config.step_mode == "fixed":
            sched = _apply_step(sched, grad, config.eps_R, config.eps_I, 1.0, config.real_only, gen.diagonal)
            ws = forward_sweep(gen, sched, x0, target)
            J = _objective_from(ws, config.ridge)
        else:
            decrease = config.eps_R * np.sum(grad.real**2) + config.eps_I * np.sum(grad.imag**2)
            while True:
                trial = _apply_step(sched, grad, config.eps_R, config.eps_I, scale, config.real_only, gen.diagonal)
                ws_trial = forward_sweep(gen, trial, x0, target)
                J_trial = _objective_from(ws_trial, config.ridge)
                if np.isfinite(J_trial) and J_trial <= J - 1e-4 * scale * decrease:
                    break
                scale *= 0.5
                if scale < 1e-12:
                    break
            if scale < 1e-12:
                termination = "stalled"
                break
            sched, ws, J = trial, ws_trial, J_trial
            scale = min(scale * 2.0, 1e6)

    return IdentificationResult(
        schedule=sched,
        J_history=np.array(J_hist),
        grad_norm_history=np.array(g_hist),
        termination=termination,
        iterations_run=it,
        final_J=float(J),
        eps_history=np.array(eps_hist),
        wall_time=time.perf_counter() - t0,
    )


def differential_baseline(gen, target: TraceRecord, real_only=False, scheme="midpoint", rcond=1e-10):
    """Per-interval least-squares rates from finite differences of the state.

    For every interval the unknown rates solve, in the least-squares sense,
    ``(x(k+1) - x(k)) / dt = A(gamma) x_e + b(gamma)`` where ``x_e`` is the
    midpoint ``(x(k) + x(k+1))/2`` (``scheme="midpoint"``, second order) or
    the current sample ``x(k)`` (``scheme="forward"``, first order).  The state trace is taken from
    ``target.states`` when present (oracle-state mode); otherwise it is
    recovered from the outputs, which requires ``c`` to have full column rank.

    Returns the schedule and a boolean mask of rank-deficient intervals, whose
    values are carried over from the previous interval (zero for the first).
    """
    gen = as_generator(gen)
    if scheme not in ("midpoint", "forward"):
        raise ValueError("scheme must be 'midpoint' or 'forward'")
    if target.states is not None and target.states.shape[1] == gen.n_states:
        X = np.asarray(target.states, dtype=float)
    else:
        if np.linalg.matrix_rank(gen.c) < gen.n_states:
            raise DimensionMismatchError(
                "state trace unavailable and outputs do not determine the state; "
                "provide target.states (oracle-state mode)"
            )
        X = target.y @ np.linalg.pinv(gen.c).T
    dt = target.dt
    K = X.shape[0]
    P = gen.n_channels
    cols = [(p, 0) for p in range(P)]
    if not real_only:
        cols += [(p, 1) for p in range(P) if not gen.diagonal[p]]
    values = np.zeros((K - 1, P), dtype=complex)
    flagged = np.zeros(K - 1, dtype=bool)
    for k in range(K - 1):
        xe = 0.5 * (X[k] + X[k + 1]) if scheme == "midpoint" else X[k]
        rhs = (X[k + 1] - X[k]) / dt - gen.Q @ xe
        design = np.column_stack(
            [
                (gen.E_R[p] @ xe + gen.F_R[p]) if part == 0 else (gen.E_I[p] @ xe + gen.F_I[p])
                for p, part in cols
            ]
        )
        sol, _, rank, _ = np.linalg.lstsq(design, rhs, rcond=rcond)
        if rank < len(cols):
            flagged[k] = True
            values[k] = values[k - 1] if k > 0 else 0.0
            continue
        for (p, part), v in zip(cols, sol):
            if part == 0:
                values[k, p] += v
            else:
                values[k, p] += 1j * v
    return DampingSchedule(dt, values), flagged
