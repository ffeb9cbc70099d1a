class FrontendError(Exception):
    """Base class for parse and normalization failures."""


class WhileSyntaxError(FrontendError):
    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"{line}:{col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class DuplicateProcedureError(FrontendError):
    pass


class MissingEntryError(FrontendError):
    pass


class AnnotationError(FrontendError):
    pass


class RecursionRejectedError(FrontendError):
    """The call graph has a cycle."""


class ArityMismatchError(FrontendError):
    pass


class UnknownIdentifierError(FrontendError):
    pass


class ArrayAliasError(FrontendError):
    pass


class TypeMismatchError(FrontendError):
    """Scalar used as an array, array used as a scalar, or length mismatch."""
