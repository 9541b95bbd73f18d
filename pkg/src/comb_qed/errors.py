"""Exception hierarchy.

Validation problems (bad inputs, infeasible requests) derive from
``ValidationError``; anything that goes wrong inside a numerical routine
derives from ``NumericalError``.  The CLI maps the two families onto
different exit codes.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class InfeasibleTargetError(ValidationError):
    """A requested qubit frequency cannot be reached."""

    def __init__(self, message, qubit=None):
        super().__init__(message)
        self.qubit = qubit


class NumericalError(RuntimeError):
    """Base class for failures inside numerical routines."""


class IntegrationError(NumericalError):
    """The time integrator could not advance; ``last_time`` is the last good time (ns)."""

    def __init__(self, message, last_time):
        super().__init__(f"{message} (last good time {last_time:.6g} ns)")
        self.last_time = last_time


class StateInvariantError(NumericalError):
    """A propagated density matrix left the physical set beyond tolerance."""

    def __init__(self, message, time, diagnostics=None):
        super().__init__(f"{message} at t = {time:.6g} ns")
        self.time = time
        self.diagnostics = diagnostics or {}


class ConvergenceError(NumericalError):
    """An iterative procedure did not reach its tolerance."""

    def __init__(self, message, residual=None):
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class FitError(NumericalError):
    """A fit could not be set up or its data carry no usable signal."""


class RankDeficientError(NumericalError):
    """Linear system for the bias currents is rank deficient."""

    def __init__(self, message, condition_number):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number
