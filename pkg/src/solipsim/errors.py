"""Exception hierarchy for the solipsim package."""

from __future__ import annotations


class SolipsimError(Exception):
    """Base class for all errors raised by this package."""


class LayoutError(SolipsimError):
    """Register layout problem: unknown name, duplicate name, or dimension mismatch."""


class NormalizationError(SolipsimError):
    """A state vector or basis vector is not normalized within tolerance."""


class IsometryError(SolipsimError):
    """A matrix claimed to be an isometry fails the adjoint-composition check."""


class MeasurementError(SolipsimError):
    """Projectors are not orthogonal, not idempotent, or do not resolve the identity."""


class ImpossibleEventError(SolipsimError):
    """Conditioning was requested on an outcome of probability below tolerance."""


class BlankRegisterError(SolipsimError):
    """A step requires a blank register that already carries amplitude."""


class ProtocolError(SolipsimError):
    """Malformed protocol: bad step, missing register, or missing halting predicate."""


class RecordError(SolipsimError):
    """Malformed observational record, e.g. two values for one observable."""


class UnevaluableError(SolipsimError):
    """A premise references registers that no longer admit evaluation."""


class DisclosureError(SolipsimError):
    """Invalid disclosure point or flag register clash."""


class DiscriminationError(SolipsimError):
    """No error-free discrimination strategy exists for the given states."""
