"""Dynamical Casimir effect in a cavity in a weak static gravitational field."""

__version__ = "0.1.0"

from .bogoliubov import BogoliubovState, ModeSet, solve_perturbative
from .coupling import CouplingMatrix, CouplingModel, ExpansionCoefficients, SectorCoupling
from .errors import (
    AiryBranchError,
    ConvergenceError,
    MetricDegeneracyError,
    OutOfRangeError,
    WeakFieldError,
)
from .geometry import (
    CavityConfig,
    MetricParams,
    MirrorMotion,
    ModeIndex,
    Sine,
    Tabulated,
    from_proper_units,
    to_proper_units,
    weak_field_expand,
)
from .modes import ModeSolver, inner_product
from .observables import (
    SpectrumResult,
    mean_number,
    n_final,
    n_first_order,
    n_fundamental,
)
from .oracle import OracleRun, integrate_exact, unitarity_defect
