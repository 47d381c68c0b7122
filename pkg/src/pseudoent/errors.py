"""Exception hierarchy shared by every module."""


class PseudoEntError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(PseudoEntError, ValueError):
    """An argument broke a documented precondition (shape, hermiticity, partition...)."""


class ResourceError(PseudoEntError):
    """A requested object would exceed the configured dimension cap."""


class CapabilityError(PseudoEntError):
    """The requested operation is not supported by this input (e.g. no purification)."""


class InputError(PseudoEntError):
    """External input (files, configs) is missing or malformed."""


class LocalityViolation(ContractViolation):
    """An LOCC step touched qubits owned by the other party."""


class InvariantViolation(PseudoEntError):
    """A checked mathematical invariant failed numerically."""
