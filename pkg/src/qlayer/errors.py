"""Exception types shared across the toolkit.

Everything raised deliberately by qlayer derives from :class:`QLayerError`,
so callers (and the CLI) can distinguish diagnosed failures from bugs.
"""


class QLayerError(Exception):
    """Base class for all qlayer-diagnosed failures."""


# ---------------------------------------------------------------- geometry

class DomainError(QLayerError):
    """A parameter point lies outside the chart's declared domain."""


class SingularChart(QLayerError):
    """The induced metric is degenerate or numerically unusable."""


class UnsupportedDimension(QLayerError):
    """The operation is not provided for this hypersurface dimension."""


# ------------------------------------------------------------------- layer

class ValidityError(QLayerError):
    """The layer half-width violates the curvature smallness condition."""


# ----------------------------------------------------------- parabolicity

class TruncationTooSmall(QLayerError):
    """Not enough radii (or range) to extract an asymptotic verdict."""


class UnsupportedChart(QLayerError):
    """The chart lacks the structure (symmetry, dimension) this op needs."""


class UnknownEulerChar(QLayerError):
    """The chart does not declare an Euler characteristic."""


# ------------------------------------------------------------------- forms

class NonAdmissibleChi1(QLayerError):
    """A transverse perturbation profile fails the admissibility checks."""


class NotStrictlyConvexAtOrigin(QLayerError):
    """The graph function is not strictly convex at its critical point."""


class LevelSetEscapesTruncation(QLayerError):
    """A requested level set leaves the resolvable radial range."""


class QuadratureDivergence(QLayerError):
    """Grid refinement fails to contract; the quadrature is not trusted."""


class DegeneratePerturbation(QLayerError):
    """The cross term vanishes within quadrature error; no direction to
    optimize."""


class CertificateFailed(QLayerError):
    """A certificate pipeline ran to completion but could not conclude."""


# ------------------------------------------------------------- eigensolver

class AssemblyError(QLayerError):
    """Discrete operator assembly produced an unusable (non-SPD) pair."""


class NoConvergence(QLayerError):
    """Iterative eigensolve did not reach the requested tolerance.

    The partial result (if any) is attached as ``.report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ZeroVector(QLayerError):
    """A Rayleigh quotient was requested for the zero vector."""


class Inconsistent(QLayerError):
    """Variational and discrete routes disagree beyond their tolerances."""


# --------------------------------------------------------------------- cli

class ScenarioError(QLayerError):
    """A scenario file is malformed or inconsistent."""
