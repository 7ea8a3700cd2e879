"""
Error taxonomy for the IBC toolkit.

Exit codes used by the CLI:
- ConfigurationError / CertificationError -> 1
- NumericalFailure -> 2
"""

from typing import Optional, Sequence


class IbcError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigurationError(IbcError):
    """Bad configuration, bad CLI usage or invalid user-supplied data."""

    exit_code = 1


class CertificationError(ConfigurationError):
    """A data matrix failed its low-rank condition."""

    def __init__(self, matrix_name: str, expected: int, found: int,
                 singular_values: Sequence[float]):
        self.matrix_name = matrix_name
        self.expected = expected
        self.found = found
        self.singular_values = list(singular_values)
        sv_text = ", ".join(f"{s:.3e}" for s in self.singular_values)
        super().__init__(
            f"{matrix_name} data matrix failed certification: rank {found}, "
            f"expected {expected}; singular values [{sv_text}]"
        )


class NumericalFailure(IbcError):
    """A closed-loop signal became non-finite."""

    exit_code = 2

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
