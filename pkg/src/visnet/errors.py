"""Exception types shared across the package."""


class VisNetError(Exception):
    """Base class for all package errors."""


class ParameterError(VisNetError, ValueError):
    """An argument or configuration value is invalid.

    ``field`` names the offending parameter when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class StructuralError(VisNetError, ValueError):
    """Array shapes do not match the network geometry."""


class DegenerateWeightError(VisNetError, ArithmeticError):
    """A weight vector has zero norm and cannot be normalized."""


class FormatError(VisNetError):
    """A file does not conform to its binary format.

    ``offset`` is the byte offset at which the problem was detected.
    """

    def __init__(self, message, offset=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.offset = offset
        self.path = path


class GenerationError(VisNetError, RuntimeError):
    """A dataset generator could not reach its symmetry target."""


class UndefinedScoreError(VisNetError, ValueError):
    """Symmetry score requested for an image with no object pixels."""
