"""Parsing, normalization, pretty-printing and source enumeration."""

from .errors import (
    AnnotationError, ArityMismatchError, ArrayAliasError, DuplicateProcedureError,
    FrontendError, MissingEntryError, RecursionRejectedError, TypeMismatchError,
    UnknownIdentifierError, WhileSyntaxError,
)
from .normalize import bounds_assert, call_order, check_normalized, normalize
from .parser import parse
from .printer import expr_str, pretty_print
from .sources import Source, SourceKind, SourceStatus, call_order_reachable, collect_sources


def load_program(text: str, entry: str = "main"):
    """Parse and normalize in one step."""
    return normalize(parse(text, entry))


__all__ = [
    "AnnotationError", "ArityMismatchError", "ArrayAliasError", "DuplicateProcedureError",
    "FrontendError", "MissingEntryError", "RecursionRejectedError", "TypeMismatchError",
    "UnknownIdentifierError", "WhileSyntaxError", "Source", "SourceKind", "SourceStatus",
    "bounds_assert", "call_order", "call_order_reachable", "check_normalized",
    "collect_sources", "expr_str", "load_program", "normalize", "parse", "pretty_print",
]
