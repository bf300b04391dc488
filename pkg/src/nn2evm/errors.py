"""Exception hierarchy shared by every stage of the toolchain."""
from __future__ import annotations


class Nn2EvmError(Exception):
    """Base class for all toolchain errors."""

    exit_code = 1


class ArchNotationError(Nn2EvmError, ValueError):
    """Malformed architecture notation; ``offset`` is the failing byte position."""

    exit_code = 3

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ArchStructureError(Nn2EvmError, ValueError):
    """Notation parsed but is internally inconsistent (e.g. layer count mismatch)."""

    exit_code = 3


class ManifestError(Nn2EvmError, ValueError):
    """Weight manifest failed schema, shape or finiteness validation."""

    exit_code = 4


class IdxFormatError(Nn2EvmError, ValueError):
    """IDX container is malformed, truncated or out of range."""

    exit_code = 5


class FixedPointError(Nn2EvmError, ArithmeticError):
    exit_code = 6


class FixedPointOverflow(FixedPointError, OverflowError):
    """Result does not fit the signed 256-bit raw range."""


class PrecisionError(FixedPointError, ValueError):
    """A decimal string or precision argument exceeds 18 fractional digits."""


class TrainingError(Nn2EvmError, ValueError):
    exit_code = 7


class CodegenError(Nn2EvmError, ValueError):
    exit_code = 8


class PlanError(Nn2EvmError, ValueError):
    """Upload plan is infeasible under the configured gas limit."""

    exit_code = 9


class CompilerError(Nn2EvmError):
    """The external contract compiler reported diagnostics."""

    exit_code = 10
