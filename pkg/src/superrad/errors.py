"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class SuperradError(Exception):
    """Base class for all package errors."""


class ConfigError(SuperradError):
    """Invalid or inconsistent configuration."""


class SaturationError(ConfigError):
    """Pump parameters would saturate the atomic transition."""


class SolverError(SuperradError):
    """Numerical failure inside a solver; exit code 3 at the CLI."""


class SolverSingular(SolverError):
    def __init__(self, message, condition=float("nan")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class NonFinite(SolverError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)
        self.step = step


class LadderOverflow(SolverError):
    """Outermost momentum orders became populated; increase n_orders."""


class EmptyTrace(SolverError):
    """Flux trace is identically zero; nothing to fit."""


class DegenerateFit(SuperradError):
    """Fit inputs do not constrain the model."""
