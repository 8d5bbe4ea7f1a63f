"""Exception hierarchy shared by every module.

Numerical failures derive from :class:`NumericalError` so the CLI can map
them onto a single exit code.
"""


class GeonlError(Exception):
    """Base class for all package errors."""


class NumericalError(GeonlError, ArithmeticError):
    """A computation hit a singular or otherwise ill-posed point."""


class SingularConfiguration(NumericalError):
    """The internal configuration matrix is (numerically) singular."""


class DegenerateInvariants(NumericalError):
    """Two deformation invariants coincide and a rotation rate is nonzero."""


class CoincidentInvariants(NumericalError):
    """A lattice interaction term diverges at coincident invariants."""


class MetricSingular(NumericalError):
    """The configuration-space mass metric cannot be inverted."""


class StepSizeUnderflow(NumericalError):
    """The adaptive integrator step fell below the representable limit."""


class SingularityApproached(NumericalError):
    """Integration stopped near a bipolar singularity with nonzero spin."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class SaturationExceeded(NumericalError):
    """A Born-Infeld radicand went negative (field beyond the maximal strength)."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not reach the requested accuracy."""


class SingularFrame(NumericalError):
    """The coframe matrix is singular at the evaluation point."""


class SingularMetric(NumericalError):
    """The metric passed to the curvature routines is singular."""


class SecondDerivativesUnavailable(GeonlError):
    """The frame does not carry second derivatives (analytic mode required)."""


class MissingConstant(GeonlError, ValueError):
    """A kinetic model lacks an inertia constant required by its kind."""


class EmptyBody(GeonlError, ValueError):
    """No point masses were supplied."""


class ParseError(GeonlError):
    """A scenario file is not well-formed."""

    def __init__(self, message, path=None, line=None, column=None):
        where = ":".join(str(p) for p in (path, line, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line, self.column = path, line, column


class SemanticError(GeonlError, ValueError):
    """A scenario is well-formed but violates one or more constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
