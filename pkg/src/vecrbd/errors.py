"""Exception hierarchy shared by all modules."""


class VecRBDError(Exception):
    """Base class for library errors."""


class ModelError(VecRBDError, ValueError):
    """Invalid robot description or model construction failure."""


class UrdfParseError(ModelError):
    """Malformed URDF text. Carries the 1-based line and 0-based column when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class UnsupportedFeatureError(ModelError):
    """The input uses a feature outside the supported subset."""


class UnsupportedStructureError(VecRBDError, ValueError):
    """The model topology does not satisfy an operation's precondition."""


class DimensionError(VecRBDError, ValueError):
    """Array argument has the wrong shape."""


class UnknownFrameError(VecRBDError, KeyError):
    """Requested frame name does not exist in the model."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown frame"


class SingularInertiaError(VecRBDError, ArithmeticError):
    """Mass matrix (or task-space inertia) failed a positive-definite factorization."""
