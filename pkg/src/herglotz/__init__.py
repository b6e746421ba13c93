"""Action-dependent (Herglotz) Lagrangian mechanics and fields with generalized Noether charges."""

from .errors import (
    BlowUp,
    CflViolation,
    ConfigError,
    ExpressionError,
    HerglotzError,
    NoConvergence,
    NonFiniteLagrangian,
    ScenarioError,
    SingularJacobian,
    SingularMassMatrix,
    StepFailure,
)
from .lagrangian import DerivativeBundle, GaugeSpec, LagrangianSpec, check_gauge, differentiate
from .mechanics import MechState, Trajectory, accelerations, convergence_order, integrate
from .noether import (
    NoetherReport,
    SymmetryGenerator,
    charge,
    charge_series,
    coordinate_translation,
    drift_report,
    symmetry_scan,
    time_translation,
)

__version__ = "0.1.0"
