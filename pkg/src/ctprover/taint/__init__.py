"""Lightweight taint analysis (dense reference and sparse production variant)."""

from __future__ import annotations

from ..frontend.sources import Source, SourceStatus
from .dense import DenseAnalyzer, analyze_dense, entry_facts, lfp, transfer
from .facts import FactSet, TaintFact, TaintMap, scalar, whole_array
from .sparse import SparseAnalyzer, analyze


def resolve_step1(sources: list[Source], tmap: TaintMap) -> list[Source]:
    """Mark every source whose variable is untainted at its label as resolved."""
    out = []
    for s in sources:
        if s.status is SourceStatus.UNRESOLVED and not tmap.tainted(s.label, s.var):
            s = s.with_status(SourceStatus.RESOLVED_STEP1)
        out.append(s)
    return out


__all__ = [
    "DenseAnalyzer", "FactSet", "SparseAnalyzer", "TaintFact", "TaintMap", "analyze",
    "analyze_dense", "entry_facts", "lfp", "resolve_step1", "scalar", "transfer", "whole_array",
]
