"""Exact small-dimension numerics for QKD security criteria.

Builds classical-quantum key states and evaluates trace distance, fidelity,
coupling mismatch, Helstrom discrimination, Eve's guessing probability and
the averaging/risk arithmetic used to interpret them.
"""

from .config import Config, get_config, set_config, using_config
from .errors import InvariantError, NumericalError, QkdsecError, ResourceError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "Config",
    "get_config",
    "set_config",
    "using_config",
    "QkdsecError",
    "ValidationError",
    "NumericalError",
    "InvariantError",
    "ResourceError",
]
