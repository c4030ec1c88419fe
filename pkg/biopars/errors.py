"""Exception hierarchy shared by the numeric core, the trainer and the harness."""


class BioparsError(Exception):
    """Base class for every error raised on purpose by this package."""


class DimensionError(BioparsError, ValueError):
    pass


class ParameterError(BioparsError, ValueError):
    pass


class StateError(BioparsError, ValueError):
    pass


class ContractError(BioparsError, ValueError):
    pass


class EvaluationError(BioparsError, FloatingPointError):
    """A probed function value was not finite."""

    def __init__(self, message: str, name: str | None = None, index: tuple | None = None):
        super().__init__(message)
        self.name = name
        self.index = index


class AlignmentError(BioparsError, ValueError):
    def __init__(self, message: str, boundary: int | None = None):
        super().__init__(message)
        self.boundary = boundary


class TrainingError(BioparsError, RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class InputError(BioparsError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class UndefinedScoreError(InputError):
    pass


class EmbeddingError(BioparsError, ValueError):
    pass


class DomainError(BioparsError, ValueError):
    pass


class FeasibilityError(BioparsError, ValueError):
    pass


class ConvergenceError(BioparsError, RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SpecError(BioparsError, ValueError):
    pass


class ConfigurationError(BioparsError, ValueError):
    def __init__(self, message: str, ids: list[str] | None = None):
        super().__init__(message)
        self.ids = ids or []
