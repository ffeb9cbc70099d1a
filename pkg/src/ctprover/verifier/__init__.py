"""Verification-condition generation, decision backends and witness replay."""

from .backends import (
    VALID, EnumerateBackend, ModelParseError, SmtLibBackend, SolverSpawnError,
    UnknownReason, Verdict, VerdictKind, check, find_solver, make_backend, parse_model,
    to_smtlib,
)
from .symexec import VC, Mode, VCConfig, VCKind, boolean_variables, gen_vcs
from .terms import InlineBlowup, TermManager
from .verify import (
    Budget, ConfirmedLeak, DeadlineExceeded, Spurious, check_all, model_to_inputs,
    prune_invariants, split_model, verify_guards, witness_replay,
)

__all__ = [
    "VALID", "Budget", "ConfirmedLeak", "DeadlineExceeded", "EnumerateBackend",
    "InlineBlowup", "Mode", "ModelParseError", "SmtLibBackend", "SolverSpawnError",
    "Spurious", "TermManager", "UnknownReason", "VC", "VCConfig", "VCKind", "Verdict",
    "VerdictKind", "boolean_variables", "check", "check_all", "find_solver", "gen_vcs",
    "make_backend", "model_to_inputs", "parse_model", "prune_invariants", "split_model",
    "to_smtlib", "verify_guards", "witness_replay",
]
