"""Exception taxonomy for the expsum package.

Numeric failures are deliberately fine-grained so callers (and the CLI)
can distinguish "your tolerance is unreachable" from "raise the working
precision" from "shrink the step size".
"""


class ExpsumError(Exception):
    """Base class for all expsum errors."""


class NotPositiveDefinite(ExpsumError):
    """Cholesky hit a nonpositive pivot.

    Usually means the expansion produced degenerate weights or the
    working precision is too low for the Gramian's condition number.
    """

    def __init__(self, pivot_index, pivot_value):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        super().__init__(
            "nonpositive pivot %g at index %d (raise mantissa_bits?)"
            % (float(pivot_value), pivot_index)
        )


class NoConvergence(ExpsumError):
    """An iterative factorization hit its sweep/iteration cap."""


class DefectiveMatrix(ExpsumError):
    """Eigendecomposition residual stayed above tolerance."""


class ZeroExponentPair(ExpsumError):
    """Diagonal Lyapunov solve would divide by a_i + a_j = 0."""


class MaxSubdivisions(ExpsumError):
    """Adaptive quadrature could not reach the tolerance.

    Carries the best available estimate and its error bound.
    """

    def __init__(self, estimate, error_estimate, nodes):
        self.estimate = estimate
        self.error_estimate = error_estimate
        self.nodes = nodes
        super().__init__(
            "tolerance unreachable; best estimate has error %.3e (%d nodes)"
            % (float(error_estimate), nodes)
        )


class EndpointSingularity(ExpsumError):
    """Kernel is singular at x=0 and the build domain was not restricted."""


class BesselOverflow(ExpsumError):
    """Bessel evaluation out of its supported range."""


class DomainViolation(ExpsumError):
    """Kernel evaluated outside its declared domain."""


class TailTooFat(ExpsumError):
    """Requested tolerance is below what the expansion supports."""


class PrecisionLoss(ExpsumError):
    """Hankel values needed for the truncation decision are numerical noise."""


class StiffnessGuard(ExpsumError):
    """max |s_l * h| > 1: shrink h or rebuild with a larger exponent scale."""

    def __init__(self, max_sh):
        self.max_sh = max_sh
        super().__init__("max|s*h| = %.3f exceeds 1" % max_sh)


class MissingTaylor(ExpsumError):
    """Singular kernel lacks the local expansion needed for splitting."""


class NearSingularStep(ExpsumError):
    """Per-step scalar equation is near-singular (|1 - w - kappa| tiny)."""


class NewtonDiverged(ExpsumError):
    """Newton iteration hit its cap or the residual grew under damping."""


class NearSingularJacobian(ExpsumError):
    """Newton derivative too small to take a step."""


class SeriesDivergence(ExpsumError):
    """Series evaluation exceeded its term cap without stagnating."""


class ParseError(ExpsumError):
    """Malformed .soe file."""


class SchemaMismatch(ExpsumError):
    """.soe file schema version not supported."""
