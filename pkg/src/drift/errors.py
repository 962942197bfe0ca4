"""Error taxonomy shared by all modules.

Each category maps 1:1 to a CLI exit code so scripted callers can branch on
failure class without parsing messages.
"""


class DriftError(Exception):
    """Base class; `category` is machine-parseable, `exit_code` stable."""

    category = "internal"
    exit_code = 1


class UsageError(DriftError):
    """Caller violated an API precondition (bad arguments, empty inputs)."""

    category = "usage"
    exit_code = 2


class ShapeError(UsageError):
    category = "shape"


class LabelError(UsageError):
    category = "label"


class DegenerateBatchError(UsageError):
    category = "degenerate-batch"


class ConfigError(DriftError):
    """Invalid configuration values."""

    category = "config"
    exit_code = 3


class SchemaError(ConfigError):
    """Config file failed schema validation; carries every violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InputOutputError(DriftError):
    """Missing/unreadable files, locked output directories."""

    category = "io"
    exit_code = 4


class FormatError(DriftError):
    """Corrupt or foreign binary containers (bad magic, truncation)."""

    category = "format"
    exit_code = 5


class ArchitectureMismatchError(FormatError):
    category = "architecture-mismatch"


class TrainingDivergedError(DriftError):
    """Non-finite loss; carries the step diagnostics in the message."""

    category = "training-diverged"
    exit_code = 6
