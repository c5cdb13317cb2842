"""Exception taxonomy shared by all piezofem modules.

Exceptions are grouped by how the command-line driver maps them to exit
codes: problems with user-supplied data (exit code 2), verification
failures (exit code 1), and internal solver failures (exit code 3).
"""


class PiezoError(Exception):
    """Base class for all piezofem errors."""


# ---------------------------------------------------------------------------
# Input errors: bad user data, rejected before any solve starts.
# ---------------------------------------------------------------------------

class InputError(PiezoError):
    """Base class for errors caused by user-supplied data."""


class InvalidScalar(InputError):
    """A scalar parameter is out of its admissible range."""


class NonPositiveDefinite(InputError):
    """A material matrix fails its positive-definiteness check."""


class ParseError(InputError):
    """A mesh or table file cannot be parsed."""


class ConfigError(InputError):
    """A run-configuration file is malformed or inconsistent."""


class TopologyError(InputError):
    """Mesh connectivity or boundary tagging is inconsistent."""


class InvalidDimension(InputError):
    """A size or dimension argument is out of range."""


class DimensionMismatch(InputError):
    """Array shapes are inconsistent with the assembled system."""


class DegenerateCell(InputError):
    """A cell volume is too close to zero for stable assembly."""


class TooLarge(InputError):
    """A requested problem exceeds a dense-path size guard."""


# ---------------------------------------------------------------------------
# Verification failures: a check ran to completion and its claim is violated.
# ---------------------------------------------------------------------------

class VerificationFailure(PiezoError):
    """Base class for failed verification claims."""


class RateFailure(VerificationFailure):
    """An observed convergence rate is below its floor."""


class CoercivityViolation(VerificationFailure):
    """A Rayleigh-quotient coercivity bound is violated."""


class PreconditionViolated(VerificationFailure):
    """A check was invoked outside its hypotheses."""


# ---------------------------------------------------------------------------
# Internal errors: the solver itself failed mid-flight.
# ---------------------------------------------------------------------------

class InternalError(PiezoError):
    """Base class for internal solver failures."""


class SingularLift(InternalError):
    """The electrostatic lift solve did not produce a usable factor."""


class SolveFailure(InternalError):
    """A linear solve missed its residual tolerance."""


class NonFiniteState(InternalError):
    """A state vector picked up NaN or Inf during time stepping."""


class StiffnessFailure(InternalError):
    """The reference integrator collapsed its step size and gave up."""
