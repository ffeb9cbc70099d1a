from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ctprover.ast import Assert, If, Load, Store, Var, While, iter_stmts, relabel
from ctprover.corpus import generate_random_program
from ctprover.frontend import (
    AnnotationError, ArityMismatchError, ArrayAliasError, DuplicateProcedureError,
    MissingEntryError, RecursionRejectedError, SourceKind, SourceStatus, TypeMismatchError,
    UnknownIdentifierError, WhileSyntaxError, check_normalized, collect_sources,
    load_program, normalize, parse, pretty_print,
)


def test_parse_minimal_entry():
    p = load_program("def main(pub p, sec k){ var x; x := p ^ k; return x; }")
    assert p.public_inputs == ("p",)
    assert p.secret_inputs == ("k",)
    assert p.entry_proc.returns == ("x",)


def test_empty_main_has_canonical_form():
    text = pretty_print(load_program("def main(){ return; }"))
    assert text == pretty_print(load_program(text))
    assert "skip;" in text


def test_compound_condition_moves_into_temporaries():
    p = load_program("def main(pub p, sec k){ var x; if (p + k < 3) then x := 1; fi return x; }")
    ifs = [s for s in iter_stmts(p.entry_proc.body) if isinstance(s, If)]
    assert len(ifs) == 1 and isinstance(ifs[0].cond, Var)
    assert check_normalized(p) == []


def test_each_load_gets_its_own_bounds_assert():
    p = load_program("def main(pub i, pub j, pub a[4]){ var x; x := a[i] + a[j]; return x; }")
    body = p.entry_proc.body.stmts
    kinds = [type(s).__name__ for s in body]
    assert kinds == ["Assert", "Load", "Assert", "Load", "Assign"]
    assert isinstance(body[1], Load) and body[1].index == Var("i")


def test_while_condition_is_recomputed_at_the_end_of_the_body():
    p = load_program("def main(pub n){ var i; i := 0; while (i < n) do i := i + 1; od return i; }")
    loop = next(s for s in iter_stmts(p.entry_proc.body) if isinstance(s, While))
    assert isinstance(loop.cond, Var)
    assert loop.body.stmts[-1].target == loop.cond.name


@pytest.mark.parametrize("text, exc", [
    ("def main(){ return; } def main(){ return; }", DuplicateProcedureError),
    ("def f(){ return; }", MissingEntryError),
    ("def f(pub x){ return; } def main(){ return; }", AnnotationError),
    ("def main(x){ return; }", AnnotationError),
    ("def f(x){ var y; y := f(x); return y; } def main(pub p){ var r; r := f(p); return r; }",
     RecursionRejectedError),
    ("def f(x){ return x; } def main(pub p){ var r; r := f(p, p); return r; }", ArityMismatchError),
    ("def main(pub p){ x := p; return; }", UnknownIdentifierError),
    ("def f(a[2], b[2]){ var r; r := 0; return r; } "
     "def main(pub q[2]){ var r; r := f(q, q); return r; }", ArrayAliasError),
    ("def main(pub p, pub a[2]){ p := a; return; }", TypeMismatchError),
    ("def main(pub p){ p := ; return; }", WhileSyntaxError),
])
def test_frontend_rejects(text, exc):
    with pytest.raises(exc):
        load_program(text)


def test_syntax_error_reports_position():
    with pytest.raises(WhileSyntaxError) as info:
        load_program("def main(pub p){\n  p := ;\n  return;\n}")
    assert info.value.line == 2


def test_corpus_round_trips_and_normalization_is_idempotent(programs):
    for name, p in programs.items():
        text = pretty_print(p)
        again = load_program(text)
        assert again == p, name
        assert pretty_print(again) == text, name
        assert normalize(p) == p, name
        assert check_normalized(p) == [], name


def test_labels_are_deterministic(programs):
    for name, p in programs.items():
        q = load_program(pretty_print(p))
        assert [s.label for s in iter_stmts(q.entry_proc.body)] == \
            [s.label for s in iter_stmts(p.entry_proc.body)], name
        assert relabel(p) == p


@given(st.integers(0, 10_000))
def test_random_programs_round_trip(seed):
    p = generate_random_program(seed)
    text = pretty_print(p)
    assert pretty_print(load_program(text)) == text
    assert check_normalized(p) == []


def test_collect_sources_straight_line_is_empty():
    assert collect_sources(load_program("def main(pub p, sec k){ var x; x := p + k; return x; }")) == []


def test_collect_sources_kinds():
    p = load_program("""
        def main(pub p, sec k, pub a[4]){
          var x, i;
          if (p) then x := a[p & 3]; fi
          a[k & 3] := 1;
          i := 0;
          while (i < p) do i := i + 1; od
          return x;
        }""")
    kinds = sorted(s.kind.value for s in collect_sources(p))
    assert kinds == sorted(k.value for k in SourceKind)
    assert all(s.status is SourceStatus.UNRESOLVED for s in collect_sources(p))


def test_collect_sources_one_per_access_and_branch(programs):
    for name, p in programs.items():
        srcs = collect_sources(p)
        assert len({s.key for s in srcs}) == len(srcs), name
        # constant indices observe nothing secret and are not sources
        observed = [s for q in p.procedures for s in iter_stmts(q.body)
                    if isinstance(s, (If, While))
                    or (isinstance(s, (Load, Store)) and isinstance(s.index, Var))]
        assert len(srcs) == len(observed), name


def test_source_status_only_moves_forward():
    p = load_program("def main(sec k){ var x; if (k) then x := 1; fi return x; }")
    s = collect_sources(p)[0]
    done = s.with_status(SourceStatus.RESOLVED_STEP2)
    assert done.status.resolved and done.key == s.key
    with pytest.raises(ValueError):
        done.with_status(SourceStatus.RESOLVED_STEP1)


def test_parse_without_normalization_keeps_compound_conditions():
    p = parse("def main(pub p){ if (p < 2) then skip; fi return; }")
    cond = next(s for s in iter_stmts(p.entry_proc.body) if isinstance(s, If)).cond
    assert not isinstance(cond, Var)
    assert check_normalized(p) != []


def test_bounds_assert_shape():
    p = load_program("def main(pub i, pub a[4]){ var x; x := a[i]; return x; }")
    a = p.entry_proc.body.stmts[0]
    assert isinstance(a, Assert)
    assert pretty_print(p).count("assert i < 4;") == 1
