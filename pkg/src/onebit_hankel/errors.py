"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class DegenerateInputError(ValueError):
    """Input is well-typed but carries no usable signal (e.g. all zeros)."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


class DivergenceError(RuntimeError):
    """The SVT iteration blew up; ``diagnostics`` holds the residual history."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class DetectionError(RuntimeError):
    """Fewer peaks than requested were found; ``partial`` holds what was found."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StageError(RuntimeError):
    """Wraps a failure inside the experiment pipeline with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
