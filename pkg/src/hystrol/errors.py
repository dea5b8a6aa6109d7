"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NumericalFailure(RuntimeError):
    """An inner solve did not converge or produced a non-finite value."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ConfigError(ValueError):
    """A configuration file could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + where)
        self.message = message
        self.line = line
        self.column = column


class ConvergenceFailure(RuntimeError):
    """An outer iteration stopped before reaching its tolerance."""


class RegistryError(KeyError):
    """A configuration names a model, target, boundary kind or mode that is not registered."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.message = message
        self.line = line

    def __str__(self):
        return self.message + (f" at line {self.line}" if self.line else "")
