"""Run configuration and model description files (INI syntax).

Run config
----------
::

    [run]
    scenario = two_qubit_xy      ; or: model = path/to/model.ini
    seed = 0
    output_dir = out

    [scenario]                   ; overrides of the built-in scenario
    T = 100                      ; ns
    K = 100

    [experiment]                 ; only with ``model =``
    T = 100                      ; ns
    K = 100
    initial_state = uu           ; qubit string, or basis-state index for Gell-Mann models
    truth = lorentzian           ; lorentzian | constant:<GHz>
    truth_h = 0.05
    truth_lambda = 0.1
    truth_d = 0.05
    guess = cosine               ; cosine | constant:<GHz>

    [gen]
    noise_sigma = 0.0

    [identify]
    eps = 0.002                  ; sets eps_R and eps_I
    max_iters = 20000
    grad_mode = approximate      ; approximate | exact
    step_mode = fixed            ; fixed | adaptive
    init = guess                 ; guess | truth | constant:<GHz> | file:<schedule.csv>

    [baseline]
    scheme = midpoint            ; midpoint | forward

    [compare]
    windows = 0:0.8, 0.9:1       ; fractions of T

Unknown sections or keys are rejected.

Model file
----------
::

    [model]
    qubits = 2                   ; Pauli basis; or: dimension = N (Gell-Mann basis)
    measure = ZI                 ; comma-separated commuting observables
    reduce = true                ; restrict to the accessible set

    [hamiltonian]                ; coefficient (GHz) per Pauli string / basis label
    ZI = 0.75
    IZ = 0.75
    XX = 0.5
    YY = 0.5

    [channels]                   ; label = term, term, ...   term = OP or OP:OP
    decay = -I, I-

For qubit models operators are strings over ``I X Y Z + -`` (qubit 1
leftmost); for Gell-Mann models they are basis labels (``S12``, ``A12``,
``D1``, ...), and Hamiltonian coefficients multiply the normalised basis
elements.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .identifier import GRAD_MODES, STEP_MODES, IdentificationConfig
from .model import Channel, SpinChainModel, accessible_set, assemble_generator, restrict
from .scenarios import (
    SCENARIOS,
    Scenario,
    TwoQubitScenario,
    build_scenario,
    initial_guess,
    product_state,
    true_gamma,
)
from .simulator import DampingSchedule, add_noise, propagate
from .su_algebra import build_basis, pauli_basis, pauli_operator


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SCENARIO_TYPES = {
    f.name: {"int": int, "float": float, "str": str, "bool": _bool}[f.type]
    for f in fields(TwoQubitScenario)
    if f.name not in ("noise_sigma", "seed")
}

SCHEMA = {
    "run": {"scenario": str, "model": str, "seed": int, "output_dir": str},
    "scenario": _SCENARIO_TYPES,
    "experiment": {
        "T": float,
        "K": int,
        "initial_state": str,
        "truth": str,
        "truth_h": float,
        "truth_lambda": float,
        "truth_d": float,
        "guess": str,
    },
    "gen": {"noise_sigma": float},
    "identify": {
        "eps": float,
        "eps_R": float,
        "eps_I": float,
        "max_iters": int,
        "J_tol": float,
        "grad_mode": str,
        "step_mode": str,
        "real_only": _bool,
        "ridge": float,
        "init": str,
        "target": str,
        "stall_window": int,
        "stall_rtol": float,
        "log_every": int,
    },
    "baseline": {"scheme": str, "real_only": _bool},
    "compare": {"windows": str},
}

DEFAULT_WINDOWS = ((0.0, 0.8), (0.9, 1.0))


@dataclass
class RunConfig:
    """Typed, validated contents of a run configuration file."""

    sections: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def seed(self) -> int:
        return self.get("run", "seed", 0)

    @property
    def scenario(self) -> str:
        return self.get("run", "scenario", "two_qubit_xy")

    @property
    def model_path(self):
        p = self.get("run", "model")
        return None if p is None else self.resolve(p)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "RunConfig":
        sections = {}
        for sec, entries in raw.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            typed = {}
            for key, value in entries.items():
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                try:
                    typed[key] = SCHEMA[sec][key](value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"[{sec}] {key}: {exc}") from None
            sections[sec] = typed
        rc = cls(sections, Path(base_dir) if base_dir else Path.cwd())
        rc.validate()
        return rc

    def validate(self):
        if self.get("run", "model") and self.get("run", "scenario"):
            raise ConfigError("[run] accepts either 'scenario' or 'model', not both")
        if self.get("run", "model") is None and self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; available: {sorted(SCENARIOS)}")
        if "experiment" in self.sections and self.get("run", "model") is None:
            raise ConfigError("[experiment] is only valid together with [run] model")
        if "scenario" in self.sections and self.get("run", "model") is not None:
            raise ConfigError("[scenario] is only valid for built-in scenarios")
        mi = self.get("identify", "max_iters")
        if mi is not None and mi < 1:
            raise ConfigError("max_iters must be >= 1")
        gm = self.get("identify", "grad_mode")
        if gm is not None and gm not in GRAD_MODES:
            raise ConfigError(f"grad_mode must be one of {GRAD_MODES}")
        sm = self.get("identify", "step_mode")
        if sm is not None and sm not in STEP_MODES:
            raise ConfigError(f"step_mode must be one of {STEP_MODES}")
        scheme = self.get("baseline", "scheme")
        if scheme is not None and scheme not in ("forward", "midpoint"):
            raise ConfigError("baseline scheme must be 'forward' or 'midpoint'")
        sigma = self.get("gen", "noise_sigma")
        if sigma is not None and sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        self.windows()

    def windows(self):
        text = self.get("compare", "windows")
        if text is None:
            return DEFAULT_WINDOWS
        out = []
        try:
            for part in text.split(","):
                a, b = part.split(":")
                out.append((float(a), float(b)))
        except ValueError:
            raise ConfigError(f"windows must look like '0:0.8, 0.9:1', got {text!r}") from None
        if any(not (0 <= a < b) for a, b in out):
            raise ConfigError("each window needs 0 <= start < end")
        return tuple(out)


def _parser():
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    return cp


def load_run_config(path=None, overrides=()) -> RunConfig:
    """Read a run config (or start from defaults) and apply ``section.key=value`` overrides."""
    raw = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        cp = _parser()
        try:
            with path.open() as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw = {sec: dict(cp[sec]) for sec in cp.sections()}
        base = path.parent
    for item in overrides:
        try:
            lhs, value = item.split("=", 1)
            sec, key = lhs.strip().split(".", 1)
        except ValueError:
            raise ConfigError(f"override must look like section.key=value, got {item!r}") from None
        raw.setdefault(sec, {})[key.strip()] = value.strip()
    return RunConfig.from_dict(raw, base)


def _model_operator(label, basis, qubits):
    label = label.strip()
    if qubits:
        if len(label) != qubits:
            raise ConfigError(f"operator {label!r} must have one symbol per qubit ({qubits})")
        try:
            return pauli_operator(label)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return basis[basis.index(label)]
    except ValueError:
        raise ConfigError(f"unknown basis label {label!r}") from None


def load_model_file(path):
    """Parse a model file; returns ``(SpinChainModel, options)``."""
    cp = _parser()
    path = Path(path)
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from None
    allowed = {"model", "hamiltonian", "channels"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown model-file sections: {sorted(extra)}")
    if "model" not in cp:
        raise ConfigError("model file needs a [model] section")
    m = dict(cp["model"])
    extra = set(m) - {"qubits", "dimension", "measure", "reduce"}
    if extra:
        raise ConfigError(f"unknown [model] keys: {sorted(extra)}")
    try:
        if "qubits" in m and "dimension" in m:
            raise ConfigError("give either qubits or dimension")
        if "qubits" in m:
            qubits = int(m["qubits"])
            basis = pauli_basis(qubits)
        elif "dimension" in m:
            qubits = 0
            basis = build_basis(int(m["dimension"]))
        else:
            raise ConfigError("[model] needs 'qubits' or 'dimension'")
        reduce = _bool(m.get("reduce", "true"))
    except ValueError as exc:
        raise ConfigError(f"[model]: {exc}") from None

    N = basis.dimension
    H = np.zeros((N, N), dtype=complex)
    if "hamiltonian" in cp:
        for lab, coef in cp["hamiltonian"].items():
            try:
                H += float(coef) * _model_operator(lab, basis, qubits)
            except ValueError:
                raise ConfigError(f"[hamiltonian] {lab}: not a number: {coef!r}") from None
    channels = []
    if "channels" in cp:
        for lab, spec in cp["channels"].items():
            terms = []
            for term in spec.split(","):
                ops = [t for t in term.split(":")]
                if len(ops) == 1:
                    op = _model_operator(ops[0], basis, qubits)
                    terms.append((op, op))
                elif len(ops) == 2:
                    terms.append(tuple(_model_operator(o, basis, qubits) for o in ops))
                else:
                    raise ConfigError(f"[channels] {lab}: bad term {term!r}")
            channels.append(Channel(lab, tuple(terms)))
    measure = [s.strip() for s in m.get("measure", "").split(",") if s.strip()]
    if not measure:
        raise ConfigError("[model] measure must list at least one observable")
    observables = {lab: _model_operator(lab, basis, qubits) for lab in measure}
    model = SpinChainModel.from_operators(basis, H, channels, observables)
    return model, {"qubits": qubits, "reduce": reduce}


def _rate_function(spec, params):
    spec = spec.strip()
    if spec == "lorentzian":
        return lambda t: true_gamma(t, *params)
    if spec == "cosine":
        return initial_guess
    if spec.startswith("constant:"):
        try:
            v = float(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad constant rate {spec!r}") from None
        return lambda t: v
    raise ConfigError(f"unknown rate function {spec!r}")


def _initial_state(spec, model, qubits):
    if qubits:
        return product_state(spec)
    try:
        k = int(spec)
    except ValueError:
        raise ConfigError(f"initial_state must be a basis-state index, got {spec!r}") from None
    N = model.basis.dimension
    if not 0 <= k < N:
        raise ConfigError(f"initial_state index {k} outside 0..{N - 1}")
    rho = np.zeros((N, N), dtype=complex)
    rho[k, k] = 1.0
    return rho


def build_experiment(rc: RunConfig) -> Scenario:
    """Model, truth, guess, synthetic target and identification config for a run."""
    sigma = rc.get("gen", "noise_sigma", 0.0)
    if rc.model_path is None:
        overrides = dict(rc.sections.get("scenario", {}))
        for key in ("eps", "max_iters"):
            if rc.get("identify", key) is not None:
                overrides[key] = rc.get("identify", key)
        exp = build_scenario(rc.scenario, noise_sigma=sigma, seed=rc.seed, **overrides)
    else:
        exp = _experiment_from_model(rc, sigma)
    exp.config = _identification_config(rc, exp)
    return exp


def _experiment_from_model(rc: RunConfig, sigma) -> Scenario:
    model, opts = load_model_file(rc.model_path)
    gen = assemble_generator(model)
    reduced = accessible_set(model, gen) if opts["reduce"] else restrict(gen, range(gen.n_states))
    e = rc.sections.get("experiment", {})
    T = e.get("T", 100.0)
    K = e.get("K", 100)
    if K < 2 or T <= 0:
        raise ConfigError("experiment needs K >= 2 and T > 0")
    dt = T / K
    params = (e.get("truth_h", 0.05), e.get("truth_lambda", 0.1), e.get("truth_d", 0.05))
    P = len(model.channels)
    if P == 0:
        raise ConfigError("model declares no dissipation channels")
    rate = _rate_function(e.get("truth", "lorentzian"), params)
    truth = DampingSchedule.from_function(rate, dt, K, P)
    guess = DampingSchedule.from_function(_rate_function(e.get("guess", "cosine"), params), dt, K, P)
    default_state = "u" * opts["qubits"] if opts["qubits"] else "0"
    rho0 = _initial_state(e.get("initial_state", default_state), model, opts["qubits"])
    x0 = reduced.reduce_state(model.coherence_vector(rho0))
    target = add_noise(propagate(reduced, truth, x0, labels=model.observable_labels), sigma, rc.seed)
    config = IdentificationConfig(init_schedule=guess)
    return Scenario(dict(e), model, reduced, rho0, x0, truth, guess, target, config, rate)


def _identification_config(rc: RunConfig, exp: Scenario) -> IdentificationConfig:
    s = rc.sections.get("identify", {})
    base = exp.config
    eps = s.get("eps")
    init_spec = s.get("init", "guess")
    K = exp.truth.K
    if init_spec == "guess":
        init = exp.guess
    elif init_spec == "truth":
        init = exp.truth
    elif init_spec.startswith("file:"):
        from .io import read_schedule

        try:
            init, _ = read_schedule(rc.resolve(init_spec[5:]), dt=exp.truth.dt)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read initial schedule: {exc}") from None
    else:
        f = _rate_function(init_spec, ())
        init = DampingSchedule.from_function(f, exp.truth.dt, K, exp.truth.n_channels)
    if init.K != K or init.n_channels != exp.truth.n_channels:
        raise ConfigError("initial schedule shape does not match the experiment")
    try:
        return IdentificationConfig(
            eps_R=s.get("eps_R", eps if eps is not None else base.eps_R),
            eps_I=s.get("eps_I", eps if eps is not None else base.eps_I),
            max_iters=s.get("max_iters", base.max_iters),
            J_tol=s.get("J_tol", base.J_tol),
            grad_mode=s.get("grad_mode", base.grad_mode),
            step_mode=s.get("step_mode", base.step_mode),
            init_schedule=init,
            real_only=s.get("real_only", base.real_only),
            ridge=s.get("ridge", base.ridge),
            stall_window=s.get("stall_window", base.stall_window),
            stall_rtol=s.get("stall_rtol", base.stall_rtol),
            log_every=s.get("log_every", base.log_every),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
