"""Signals and failures shared across the integrator stack."""


class StepRejected(Exception):
    """Step produced an invalid state (negativity, containment breach);
    the caller should retry with a smaller dt."""


class NumericalBlowup(Exception):
    """Non-finite values appeared; the path is aborted."""


class PositivityLost(Exception):
    """Density fell below the strict-positivity floor of the Galerkin layer."""


class SingularMass(Exception):
    """Mass operator cannot be inverted (density not strictly positive)."""


class PreconditionError(ValueError):
    """An operation's stated precondition was violated."""
