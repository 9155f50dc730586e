"""Built-in scenarios.

``two_qubit_xy``: two XY-coupled qubits with amplitude damping at one shared,
time-varying rate, measured through ``<sigma^z_1>``.  The reduced state is
kept in expectation-value coordinates,

    x~ = [<ZI>, <IZ>, <XX>, <XY>, <YX>, <YY>]

(rescaled by 2 from the orthonormal Pauli coordinates), so that ``A~`` and
``b~`` read directly as

    [[-g,  0,  0, -G,  G,  0],        b~ = [-g, -g, 0, 0, 0, 0]
     [ 0, -g,  0,  G, -G,  0],
     [ 0,  0, -g, -w2, -w1, 0],
     [ G, -G, w2, -g,  0, -w1],
     [-G,  G, w1,  0, -g, -w2],
     [ 0,  0,  0,  w1, w2, -g]]

with ``g`` the rate, ``G`` the coupling and ``w1, w2`` the qubit frequencies.
Units: GHz (angular) and ns.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError
from .identifier import IdentificationConfig
from .model import Channel, ReducedModel, SpinChainModel, accessible_set, assemble_generator, restrict
from .simulator import DampingSchedule, TraceRecord, add_noise, propagate
from .su_algebra import pauli_basis, pauli_operator

TWO_QUBIT_ORDER = ("ZI", "IZ", "XX", "XY", "YX", "YY")


def true_gamma(t, h=0.05, lam=0.1, d=0.05):
    """Lorentzian-bath damping rate ``2 h lam sinh(dt/2) / (d cosh(dt/2) + lam sinh(dt/2))``."""
    t = np.asarray(t, dtype=float)
    s = np.sinh(0.5 * d * t)
    return 2.0 * h * lam * s / (d * np.cosh(0.5 * d * t) + lam * s)


def initial_guess(t):
    """Starting rate ``0.04 cos(0.01 t) + 0.0348`` (GHz, t in ns)."""
    return 0.04 * np.cos(0.01 * np.asarray(t, dtype=float)) + 0.0348


def product_state(label: str) -> np.ndarray:
    """Density matrix of a computational product state, e.g. ``"uu"`` or ``"ud"``."""
    kets = {"u": np.array([1.0, 0.0]), "d": np.array([0.0, 1.0])}
    try:
        psi = kets[label[0]]
        for ch in label[1:]:
            psi = np.kron(psi, kets[ch])
    except (KeyError, IndexError):
        raise ConfigError(f"initial state must be a string over 'u'/'d', got {label!r}") from None
    return np.outer(psi, psi).astype(complex)


@dataclass
class TwoQubitScenario:
    omega1: float = 1.5
    omega2: float = 1.5
    g: float = 1.0
    h_env: float = 0.05
    lambda_env: float = 0.1
    d_env: float = 0.05
    T: float = 100.0
    K: int = 100
    initial_state: str = "uu"
    eps: float = 0.002
    max_iters: int = 20000
    tied: bool = True
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2:
            raise ConfigError(f"K must be an integer >= 2, got {self.K}")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.eps <= 0 or self.max_iters < 1:
            raise ConfigError("eps must be positive and max_iters >= 1")
        self.K = int(self.K)

    @property
    def dt(self) -> float:
        return self.T / self.K

    @classmethod
    def keys(cls):
        return tuple(f.name for f in fields(cls))


@dataclass
class Scenario:
    """Everything needed to run and score one identification experiment."""

    params: object
    model: SpinChainModel
    reduced: ReducedModel
    rho0: np.ndarray
    x0: np.ndarray
    truth: DampingSchedule
    guess: DampingSchedule
    target: TraceRecord
    config: IdentificationConfig
    rate: object = None

    @property
    def generator(self):
        return self.reduced.generator

    def true_rate(self, t):
        """Continuous-time true rate (used by the dense oracle and for scoring)."""
        if self.rate is not None:
            return self.rate(t)
        p = self.params
        return true_gamma(t, p.h_env, p.lambda_env, p.d_env)


def two_qubit_model(omega1=1.5, omega2=1.5, g=1.0, tied=True) -> SpinChainModel:
    basis = pauli_basis(2)
    H = (
        0.5 * omega1 * pauli_operator("ZI")
        + 0.5 * omega2 * pauli_operator("IZ")
        + 0.5 * g * (pauli_operator("XX") + pauli_operator("YY"))
    )
    terms = [(pauli_operator("-I"),) * 2, (pauli_operator("I-"),) * 2]
    if tied:
        channels = [Channel("decay", tuple(terms))]
    else:
        channels = [Channel("decay_1", (terms[0],)), Channel("decay_2", (terms[1],))]
    return SpinChainModel.from_operators(basis, H, channels, {"ZI": pauli_operator("ZI")})


def two_qubit_reduced(model: SpinChainModel) -> ReducedModel:
    """Accessible subsystem in the display ordering and expectation coordinates."""
    gen = assemble_generator(model)
    closed = accessible_set(model, gen)
    labels = model.basis.labels
    found = {labels[i] for i in closed.kept_indices}
    if found != set(TWO_QUBIT_ORDER):
        raise RuntimeError(f"unexpected accessible set {sorted(found)}")
    order = [labels.index(lab) for lab in TWO_QUBIT_ORDER]
    return restrict(gen, order).rescaled(np.sqrt(model.basis.dimension))


def build_two_qubit_xy(**overrides) -> Scenario:
    unknown = set(overrides) - set(TwoQubitScenario.keys())
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    p = TwoQubitScenario(**overrides)
    model = two_qubit_model(p.omega1, p.omega2, p.g, p.tied)
    reduced = two_qubit_reduced(model)
    rho0 = product_state(p.initial_state)
    x0 = reduced.reduce_state(model.coherence_vector(rho0))
    P = 1 if p.tied else 2
    truth = DampingSchedule.from_function(
        lambda t: true_gamma(t, p.h_env, p.lambda_env, p.d_env), p.dt, p.K, P
    )
    guess = DampingSchedule.from_function(initial_guess, p.dt, p.K, P)
    target = propagate(reduced, truth, x0, labels=model.observable_labels)
    target = add_noise(target, p.noise_sigma, p.seed)
    config = IdentificationConfig(
        eps_R=p.eps, eps_I=p.eps, max_iters=p.max_iters, init_schedule=guess, real_only=True
    )
    return Scenario(p, model, reduced, rho0, x0, truth, guess, target, config)


SCENARIOS = {"two_qubit_xy": build_two_qubit_xy}
SCENARIO_PARAMS = {"two_qubit_xy": TwoQubitScenario}


def build_scenario(name="two_qubit_xy", **overrides) -> Scenario:
    try:
        builder = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}") from None
    return builder(**overrides)


def scenario_defaults(name="two_qubit_xy") -> dict:
    return asdict(SCENARIO_PARAMS[name]())
