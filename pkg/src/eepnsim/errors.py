"""Error types shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, RangeError -> 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (bad constellation label,
    violated LinkConfig invariant, malformed scenario file, ...)."""


class RangeError(RuntimeError):
    """A requested target could not be bracketed by the achievable range,
    e.g. a reference SNR outside the simulated SNR(OSNR) span."""

    def __init__(self, message: str, achieved_min: float | None = None,
                 achieved_max: float | None = None):
        super().__init__(message)
        self.achieved_min = achieved_min
        self.achieved_max = achieved_max
