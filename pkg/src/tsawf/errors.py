"""Exception hierarchy and the process exit codes derived from it."""


class TsawfError(Exception):
    """Base class for all toolkit errors (exit code 4: internal invariant)."""

    exit_code = 4


class ConfigError(TsawfError):
    """Invalid configuration, parameters, or CLI arguments (exit code 2)."""

    exit_code = 2


class DataError(TsawfError):
    """Invalid or insufficient input data (exit code 3)."""

    exit_code = 3


class MalformedLine(DataError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        msg = f"line {line_no}: cannot parse trace line"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class EmptyTrace(DataError):
    pass


class NonMonotonicTime(DataError):
    def __init__(self, line_no: int, decrease: float):
        self.line_no = line_no
        self.decrease = decrease
        super().__init__(
            f"line {line_no}: timestamp decreases by {decrease:g} ms; "
            "pass a time slack to tolerate capture jitter"
        )


class MissingDirectory(DataError):
    pass


class MalformedLayout(DataError):
    pass


class DatasetLoadError(DataError):
    """One or more trace files failed to parse; carries the full report."""

    def __init__(self, failures):
        self.failures = list(failures)
        detail = "; ".join(f"{path}: {err}" for path, err in self.failures)
        super().__init__(f"{len(self.failures)} file(s) failed to parse: {detail}")


class InvalidOverlap(ConfigError):
    pass


class InvalidLength(ConfigError):
    pass


class InsufficientData(DataError):
    pass


class DimensionMismatch(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class WindowTooLarge(ConfigError):
    pass


class DegenerateLabels(DataError):
    pass


class NoPrototype(ConfigError):
    pass


class MissingTruth(DataError):
    pass


class SchemaMismatch(ConfigError):
    """A model was applied to rows built under a different feature schema."""
