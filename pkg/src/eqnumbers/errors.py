"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class CatalogFormatError(ValueError):
    """The catalog file cannot be read at all (bad header, empty file)."""


class CatalogRowError(ValueError):
    """A single catalog row failed validation."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class UnderdispersedError(ValueError):
    """Sample variance does not exceed the mean, so no NBD fit exists.

    ``poisson_consistent`` is always True: callers are expected to fall
    back to the Poisson model.
    """

    poisson_consistent = True

    def __init__(self, mean, variance):
        super().__init__(
            f"variance {variance:.6g} <= mean {mean:.6g}: series is not "
            "overdispersed, use the Poisson model")
        self.mean = mean
        self.variance = variance


class DegenerateSeriesError(ValueError):
    """Series cannot support the requested fit (e.g. all counts zero)."""


class ConvergenceError(RuntimeError):
    """Likelihood maximisation failed within its iteration budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
