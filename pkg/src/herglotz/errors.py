"""Exception hierarchy shared by the solvers and the CLI."""


class HerglotzError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteLagrangian(HerglotzError, ArithmeticError):
    """The Lagrangian (or one of its partials) evaluated to NaN or infinity."""


class SingularMassMatrix(HerglotzError, ArithmeticError):
    """The velocity Hessian is singular or too ill-conditioned to invert."""


class StepFailure(HerglotzError):
    """An integration stage left the admissible domain."""


class CflViolation(HerglotzError, ValueError):
    """The time step breaks the stability bound of the explicit stencil."""


class BlowUp(HerglotzError):
    """Field amplitude grew past the blow-up guard."""


class NoConvergence(HerglotzError):
    """Iteration budget exhausted; ``path`` holds the last iterate."""

    def __init__(self, message, path=None, residual=None):
        super().__init__(message)
        self.path = path
        self.residual = residual


class SingularJacobian(HerglotzError, ArithmeticError):
    """Newton Jacobian could not be factorised and no fallback succeeded."""


class ExpressionError(HerglotzError, ValueError):
    """An expression string could not be parsed or uses forbidden symbols."""


class ConfigError(HerglotzError, ValueError):
    """Scenario configuration failed validation."""


class ScenarioError(HerglotzError):
    """A solver failed while running a scenario."""
