"""Exception hierarchy shared by all modules."""


class SdnaError(Exception):
    """Base class for errors raised by this package."""


class InvalidSubsetError(SdnaError, ValueError):
    pass


class FactorizationError(SdnaError, ArithmeticError):
    """A principal block was singular or indefinite."""

    def __init__(self, subset, message="block is not positive definite"):
        self.subset = tuple(int(i) for i in subset)
        super().__init__(f"{message}: subset {list(self.subset)}")


class ImproperSamplingError(SdnaError, ValueError):
    pass


class UnsupportedSamplingError(SdnaError, ValueError):
    pass


class CapacityError(SdnaError, ValueError):
    pass


class InnerSolverError(SdnaError, ArithmeticError):
    """An inner subproblem solver did not reach its tolerance."""

    def __init__(self, message, **dump):
        self.dump = dump
        super().__init__(message)


class DivergenceError(SdnaError, ArithmeticError):
    pass


class InvariantViolation(SdnaError, AssertionError):
    pass


class FormatError(SdnaError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ConfigError(SdnaError, ValueError):
    pass
