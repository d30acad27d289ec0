"""Exception types shared across the package."""

from __future__ import annotations


class ConeVerifyError(Exception):
    """Base class for all package-specific errors."""


class FormValidationError(ConeVerifyError):
    """A quadratic form failed a structural check at load or query time."""


class NonDegeneracyViolation(FormValidationError):
    """The form has an eigenvalue below the degeneracy tolerance."""


class DegenerateSubspace(ConeVerifyError):
    """A subspace is degenerate for the form; complement or normalization
    is not available."""


class SingularPoint(ConeVerifyError):
    """The vector field vanishes at the queried point."""


class FlowDirectionNotPositive(ConeVerifyError):
    """The form is not positive on the flow direction; the normal-bundle
    criterion does not apply at this point."""


class IntegrationError(ConeVerifyError):
    """The integrator could not produce a valid trajectory."""


class EscapedRegion(IntegrationError):
    """A trajectory left the declared region."""

    def __init__(self, time, state):
        super().__init__(f"trajectory left the region at t={time:.6g}")
        self.time = time
        self.state = state


class NonFinite(IntegrationError):
    """Overflow or NaN appeared during integration."""

    def __init__(self, time):
        super().__init__(f"non-finite state at t={time:.6g}")
        self.time = time


class SeparationFailedOnOrbit(ConeVerifyError):
    """Separation does not hold at some grid state of an orbit."""

    def __init__(self, time, state, verdict=None):
        msg = f"separation failed at t={time:.6g}"
        if verdict is not None:
            msg += f" (verdict {verdict})"
        super().__init__(msg)
        self.time = time
        self.state = state
        self.verdict = verdict


class NegativeVectorEscapedCone(ConeVerifyError):
    """A vector that started in the negative cone reached the closure of
    the positive cone along the orbit."""

    def __init__(self, time):
        super().__init__(f"negative vector left its cone at t={time:.6g}")
        self.time = time


class NoConvergence(ConeVerifyError):
    """Iterated cone images stagnated before reaching the target gap."""

    def __init__(self, last_gap):
        super().__init__(f"subspace iteration stagnated at gap {last_gap:.3e}")
        self.last_gap = last_gap


class NotJSeparated(ConeVerifyError):
    """The linear map does not preserve the positive cone."""


class NonPositiveSpectrum(ConeVerifyError):
    """The polar factor would need a square root of a matrix whose
    spectrum is not real positive."""


class IllConditionedSplitting(ConeVerifyError):
    """Sampled bundles are too close to parallel to build projections."""


class SingularityInRegion(ConeVerifyError):
    """An operation that requires a singularity-free sample set found a
    near-singular point."""

    def __init__(self, point):
        super().__init__("sample set contains a (near-)singularity")
        self.point = point


class InconclusiveClassification(ConeVerifyError):
    """Trend data disagrees across samples; no classification is made."""


class UnknownField(ConeVerifyError):
    """Requested builtin vector field does not exist."""


class ExprSyntaxError(ConeVerifyError):
    """Malformed expression text."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ConeVerifyError):
    """Expression references a name that is neither a variable, a declared
    parameter nor a known function."""

    def __init__(self, name, position):
        super().__init__(f"unknown identifier '{name}' at position {position}")
        self.name = name
        self.position = position


class EvaluationDomainError(ConeVerifyError):
    """Evaluation hit a domain fault (division by zero, log of a
    non-positive number, ...)."""


class ConfigError(ConeVerifyError):
    """Invalid CLI or config-file input."""
