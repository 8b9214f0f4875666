"""Exception types shared across the package."""


class RecbenchError(Exception):
    """Base class for errors raised by this package."""


class ParseError(RecbenchError):
    """A line-oriented input file failed to parse."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class ConfigError(RecbenchError):
    """An experiment configuration is missing, malformed, or inconsistent."""


class CapacityError(RecbenchError):
    """A dense allocation would exceed the documented size cutoff."""


class DivergenceError(RecbenchError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, phase, message=""):
        detail = f": {message}" if message else ""
        super().__init__(f"non-finite values during {phase}{detail}")
        self.phase = phase


class ExperimentError(RecbenchError):
    """A model run failed inside the experiment harness."""
