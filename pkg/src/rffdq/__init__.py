"""Classical surrogate regression toolkit for trigonometric-kernel models.

The package is organized around the pipeline

    encoding strategy -> frequency lattice -> (re-weighted) kernel
        -> frequency sampling -> random-feature ridge regression,

with exact oracles (explicit-feature ridge, kernel ridge, small statevector
simulation) and calculators for the sufficiency / necessity sample bounds.
"""

from .errors import CapacityError, ConfigError, DegenerateDistributionError, NonIntegerFrequencyError

__all__ = [
    "CapacityError",
    "ConfigError",
    "DegenerateDistributionError",
    "NonIntegerFrequencyError",
]

__version__ = "0.1.0"
