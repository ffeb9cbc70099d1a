"""Concrete semantics: interpreter, batch kernels and the brute-force oracle."""

from .interp import (
    DEFAULT_FUEL, Event, EventKind, InputError, Interpreter, RunOutcome, Status,
    format_trace, run, traces_prefix_equal,
)
from .oracle import CapExceeded, OracleLimits, Secure, Witness, oracle_check_ct

__all__ = [
    "DEFAULT_FUEL", "Event", "EventKind", "InputError", "Interpreter", "RunOutcome",
    "Status", "format_trace", "run", "traces_prefix_equal", "CapExceeded",
    "OracleLimits", "Secure", "Witness", "oracle_check_ct",
]
