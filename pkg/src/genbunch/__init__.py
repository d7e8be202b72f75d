"""Generalized bunching of partially distinguishable particles in linear networks."""

from .config import Settings, settings, use_settings
from .errors import (
    CapacityError,
    ContractError,
    InfeasibleError,
    NotPassiveError,
    NotPhysicalError,
    NotUnitaryError,
    NumericalInconsistencyError,
)

__version__ = "0.1.0"
