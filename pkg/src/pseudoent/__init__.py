"""Simulation toolkit for pseudo-entangled state families built from EFI pairs."""
from . import adversary, efi, entdiag, families, locc, qcore
from .errors import (CapabilityError, ContractViolation, InputError, InvariantViolation,
                     LocalityViolation, PseudoEntError, ResourceError)

__version__ = "0.1.0"

__all__ = [
    "adversary", "efi", "entdiag", "families", "locc", "qcore",
    "PseudoEntError", "ContractViolation", "ResourceError", "CapabilityError", "InputError",
    "LocalityViolation", "InvariantViolation",
]
