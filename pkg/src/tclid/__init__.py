"""Gradient-based identification of time-varying damping rates in TCL master equations."""

from .errors import (
    ConfigError,
    DimensionMismatchError,
    ExpansionError,
    InconsistentBasisError,
    InvalidDimensionError,
    ModelError,
    NumericalAbort,
    TCLError,
)
from .identifier import (
    IdentificationConfig,
    IdentificationResult,
    differential_baseline,
    gradient,
    gradient_forward,
    identify,
    objective,
    sensitivity_step,
)
from .model import (
    Channel,
    GeneratorMatrices,
    ReducedModel,
    SpinChainModel,
    accessible_set,
    assemble_generator,
    evaluate_A,
    evaluate_b,
    restrict,
)
from .scenarios import build_scenario, initial_guess, true_gamma
from .simulator import (
    DampingSchedule,
    TraceRecord,
    add_noise,
    dense_evolve,
    expm,
    propagate,
    step,
)
from .su_algebra import (
    LieBasis,
    StructureConstants,
    build_basis,
    expand_operator,
    pauli_basis,
    pauli_operator,
    structure_constants,
)

__version__ = "0.1.0"
