from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class TaintFact:
    """A scalar or a whole array whose value may depend on a secret."""

    name: str
    array: bool = False

    def __str__(self) -> str:
        return f"{self.name}[]" if self.array else self.name


def scalar(name: str) -> TaintFact:
    return TaintFact(name, False)


def whole_array(name: str) -> TaintFact:
    return TaintFact(name, True)


FactSet = frozenset[TaintFact]


@dataclass
class TaintMap:
    """Facts holding just before each labeled statement runs.

    For a loop the facts are those at the loop head, i.e. the least fixed
    point joined over the entry edge and the back edge.
    """

    facts: dict[int, FactSet]
    summaries: dict[tuple[str, FactSet], FactSet] = field(default_factory=dict)
    max_iterations: int = 0

    def at(self, label: int) -> FactSet:
        return self.facts.get(label, frozenset())

    def tainted(self, label: int, var: str) -> bool:
        return any(f.name == var for f in self.at(label))

    def remove(self, label: int, var: str) -> "TaintMap":
        """Copy with ``var`` dropped from the facts at ``label``."""
        facts = dict(self.facts)
        facts[label] = frozenset(f for f in self.at(label) if f.name != var)
        return TaintMap(facts, dict(self.summaries), self.max_iterations)

    def dump(self) -> str:
        lines = []
        for lab in sorted(self.facts):
            body = ", ".join(str(f) for f in sorted(self.facts[lab]))
            lines.append(f"{lab}: {{{body}}}")
        return "\n".join(lines)

    def same_facts(self, other: "TaintMap") -> bool:
        labels = set(self.facts) | set(other.facts)
        return all(self.at(lab) == other.at(lab) for lab in labels)
