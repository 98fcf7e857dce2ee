"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """A frequency set (or materialization) would exceed its configured cap.

    Signals the caller to switch to lazy / sampling-based workflows instead
    of materializing an exponentially large lattice.
    """


class NonIntegerFrequencyError(ValueError):
    """An operation that requires an integer frequency lattice was given a
    non-integer one (orthogonality, and hence uniqueness, is not guaranteed)."""


class DegenerateDistributionError(RuntimeError):
    """A frequency distribution has zero total mass, or a conditional step
    hit an exactly-unreachable prefix (inconsistent cores)."""


class ConfigError(ValueError):
    """A configuration document (JSON/CLI input) is malformed or inconsistent."""
