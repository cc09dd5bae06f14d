"""Directed greybox fuzzing guided by Markov-chain geometry on control-flow graphs."""
from .errors import (DataError, GeoFuzzError, InputError, NumericalError, ParameterError,
                     StateError, StructuralError)

__version__ = "0.1.0"

__all__ = ["DataError", "GeoFuzzError", "InputError", "NumericalError", "ParameterError",
           "StateError", "StructuralError", "__version__"]
