"""Fibre backends: concrete monoidal categories used as fibres."""
from .finset import FinSetFibre, SMor, finset_indexed
from .modules import MMor, ModuleFibre, ModuleIndexed, prime_factors
from .enumerated import EnumeratedFibre, EnumeratedIndexed

__all__ = [
    "FinSetFibre", "SMor", "finset_indexed",
    "MMor", "ModuleFibre", "ModuleIndexed", "prime_factors",
    "EnumeratedFibre", "EnumeratedIndexed",
]
