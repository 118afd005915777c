"""Exception hierarchy shared by every module.

Each error carries a stable ``code`` string so the command line can emit
machine-readable failures without inspecting exception types.
"""

from __future__ import annotations


class ContextLabError(Exception):
    """Base class for domain errors (exit code 2 on the command line)."""

    code = "domain_error"

    def to_dict(self) -> dict[str, str]:
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


class DimensionMismatch(ContextLabError):
    """Operands act on different Hilbert spaces."""

    code = "dimension_mismatch"


class NumericalRangeError(ContextLabError):
    """A probability fell outside [0, 1] beyond tolerance."""

    code = "numerical_range"


class InvalidBloch(ContextLabError):
    """Bloch coordinates lie outside the qubit effect cone."""

    code = "invalid_bloch"


class ResourceLimit(ContextLabError):
    """A configured size cap would be exceeded."""

    code = "resource_limit"


class ShapeMismatch(ContextLabError):
    """An array or grouping has the wrong shape."""

    code = "shape_mismatch"


class EtaMismatch(ContextLabError):
    """Observables were expected to share a common sharpness."""

    code = "eta_mismatch"


class InvalidJointParams(ContextLabError):
    """Joint POVM parameters give a non-positive effect."""

    code = "invalid_joint_params"


class NotProjective(ContextLabError):
    """More than one measurement is non-projective."""

    code = "not_projective"


class DimensionLimit(ContextLabError):
    """Problem dimension exceeds the supported range."""

    code = "dimension_limit"


class EmptyPolytope(ContextLabError):
    """The feasible region is empty."""

    code = "empty_polytope"


class ClassificationFailure(ContextLabError):
    """A vertex did not fit any known type."""

    code = "classification_failure"


class NotNormalized(ContextLabError):
    """A distribution does not sum to one."""

    code = "not_normalized"


class NoDisturbanceViolated(ContextLabError):
    """Marginals disagree across contexts."""

    code = "no_disturbance_violated"


class IncompatiblePair(ContextLabError):
    """A pair of noisy observables has no joint measurement."""

    code = "incompatible_pair"


class EquivalenceCheckFailed(ContextLabError):
    """A required operational equivalence does not hold."""

    code = "equivalence_check_failed"


class DegenerateFit(ContextLabError):
    """The data cannot determine the requested model."""

    code = "degenerate_fit"


class InfeasibleLP(ContextLabError):
    """The linear program has no feasible point."""

    code = "infeasible_lp"
