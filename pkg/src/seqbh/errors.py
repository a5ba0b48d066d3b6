"""Exception types shared across the package."""


class SeqBHError(Exception):
    """Base class for all package errors."""


class LadderError(SeqBHError, ValueError):
    """Critical values violate the ordering required by the procedure."""


class UsageError(SeqBHError, ValueError):
    """Caller supplied inputs that do not match the procedure state."""


class DomainError(SeqBHError, ValueError):
    """A parameter lies outside the domain of a formula."""


class StreamUnderrun(SeqBHError, RuntimeError):
    """A stream ran out of data before the procedure reached a decision."""

    def __init__(self, stream, n):
        self.stream = stream
        self.n = n
        super().__init__(f"stream underrun: stream {stream} has no observation at n={n}")


class NumericalError(SeqBHError, RuntimeError):
    """An iterative numerical routine failed to converge."""


class NotPositiveDefinite(SeqBHError, ValueError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot, value):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} has value {value:.6g}"
        )


class ConfigError(SeqBHError, ValueError):
    """Experiment or hypothesis configuration is malformed."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
