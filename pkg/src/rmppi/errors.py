"""Exception hierarchy shared by every subpackage.

The CLI turns these into process exit codes through :func:`exit_code_for`.
"""

from pathlib import Path


class RmppiError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(RmppiError, ValueError):
    pass


class ContractError(RmppiError, ValueError):
    """Dimension, shape or precondition mismatch at an API boundary."""


class NonFiniteError(ContractError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SoftQConvergenceError(RmppiError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"Soft Q iteration did not converge after {iterations} iterations "
            f"(sup-norm residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


class EnumerationLimitError(RmppiError):
    def __init__(self, count: int, limit: int):
        super().__init__(
            f"Refusing to enumerate {count} action sequences (limit {limit})"
        )
        self.count = count
        self.limit = limit


class WeightFileError(RmppiError):
    pass


class BadMagicError(WeightFileError):
    pass


class BadVersionError(WeightFileError):
    pass


class TruncatedError(WeightFileError):
    pass


class InsufficientDataError(RmppiError):
    def __init__(self, available: int, required: int, what: str = "windows"):
        super().__init__(
            f"Dataset provides {available} {what}, at least {required} are required"
        )
        self.available = available
        self.required = required


class DatasetMismatchError(RmppiError):
    pass


class AcceptanceViolation(RmppiError):
    pass


class ArtifactIOError(RmppiError):
    def __init__(self, path: Path | str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = Path(path)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, AcceptanceViolation):
        return 2
    if isinstance(error, ArtifactIOError):
        return 3
    return 1
