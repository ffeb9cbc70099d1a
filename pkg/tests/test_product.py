from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from ctprover.ast import Assert, BinOp, IntLit, UnOp, Var, While, iter_stmts
from ctprover.corpus import generate_random_program
from ctprover.frontend import SourceKind, SourceStatus, collect_sources, parse, pretty_print
from ctprover.pipeline import PipelineConfig, run_pipeline
from ctprover.product import (
    GuardRole, ProductKind, Xi, all_tainted, build_cross_product, build_semi_product,
    erase, gen_invariants, xi,
)
from ctprover.semantics import run
from ctprover.taint import analyze, resolve_step1

from _support import (
    plain_trace, product_inputs, project_trace, prog, random_inputs, states, strip_guards,
)

BUILDERS = {"semi": build_semi_product, "cross": build_cross_product}


def x(n):
    return Var(n)


def test_xi_examples():
    assert xi(IntLit(5)) == IntLit(0)
    assert xi(x("a")) == x("b$a")
    assert xi(UnOp("~", x("a"))) == x("b$a")
    assert xi(BinOp("+", x("a"), IntLit(1))) == x("b$a")
    assert xi(BinOp("^", x("a"), x("a"))) == x("b$a")
    assert xi(BinOp("*", x("a"), x("c"))) == BinOp("|", x("b$a"), x("b$c"))


def test_Xi_examples():
    assert Xi(IntLit(5)) == IntLit(5)
    assert Xi(BinOp("+", x("a"), IntLit(1))) == BinOp("+", x("sh$a"), IntLit(1))
    assert Xi(UnOp("!", x("a"))) == UnOp("!", x("sh$a"))


LEAKY = "def main(pub p, sec k, pub a[4]){ var x, y; x := k & 3; y := a[x]; if (y) then y := p; fi return y; }"


def test_semi_product_shape():
    p = prog(LEAKY)
    text = pretty_print(build_semi_product(p, analyze(p)).program)
    assert "b$k := 1;" in text and "b$p := 0;" in text
    assert "b$x := b$k;" in text
    assert "assert !b$x;" in text
    assert "b$y := 0;" in text   # untainted array: the loaded value is public
    assert text.index("assert !b$x;") < text.index("assert x < 4;")


def test_cross_product_shape():
    p = prog(LEAKY)
    pp = build_cross_product(p, analyze(p))
    text = pretty_print(pp.program)
    assert "sec sh$k" in text.splitlines()[0]
    assert pp.shadow_secrets == {"sh$k": "k"}
    assert "sh$p := p;" in text
    assert "assert x == sh$x;" in text
    assert "assume sh$x < 4;" in text
    assert "sh$y := sh$a[sh$x];" in text


def test_untainted_assignment_is_copied_into_the_shadow():
    p = prog("def main(pub p, sec k){ var x; x := p + 1; if (x) then skip; fi return x; }")
    text = pretty_print(build_cross_product(p, analyze(p)).program)
    assert "sh$x := x;" in text


def test_loop_guards_begin_in_body_and_exit_after():
    p = prog("def main(sec k){ var i; i := 0; while (i < k) do i := i + 1; od return i; }")
    pp = build_cross_product(p, analyze(p))
    loop = next(s for s in iter_stmts(pp.program.entry_proc.body) if isinstance(s, While))
    first = loop.body.stmts[0]
    roles = {g.role for g in pp.guard_index.values()}
    assert roles == {GuardRole.BEGIN, GuardRole.EXIT}
    assert pp.guard_index[first.label].role is GuardRole.BEGIN
    stmts = pp.program.entry_proc.body.stmts
    after = stmts[stmts.index(loop) + 1]
    assert isinstance(after, Assert) and pp.guard_index[after.label].role is GuardRole.EXIT


@pytest.mark.parametrize("kind", ["semi", "cross"])
def test_one_guard_per_tainted_source_and_two_per_loop(programs, kind):
    for name, p in programs.items():
        t = analyze(p)
        pp = BUILDERS[kind](p, t)
        want = 0
        for s in resolve_step1(collect_sources(p), t):
            if s.status is SourceStatus.UNRESOLVED:
                want += 2 if s.kind is SourceKind.LOOP_COND else 1
                assert pp.guards_of(s.label), (name, s)
        assert len(pp.guard_index) == want, name


@pytest.mark.parametrize("kind", ["semi", "cross"])
def test_erase_recovers_the_original(programs, kind):
    for name, p in programs.items():
        for t in (analyze(p), all_tainted(p)):
            pp = BUILDERS[kind](p, t)
            assert erase(pp) == p, name
            assert set(pp.origin.values()) == {s.label for q in p.procedures
                                               for s in iter_stmts(q.body)}, name


@pytest.mark.parametrize("kind", ["semi", "cross"])
def test_products_print_and_parse_back(programs, kind):
    for name, p in programs.items():
        pp = BUILDERS[kind](p, analyze(p))
        text = pretty_print(pp.program)
        assert pretty_print(parse(text)) == text, name


def test_gen_invariants():
    p = prog("""def main(pub n, sec k){ var i, acc; i := 0; acc := 0;
        while (i < n) do acc := acc + k; i := i + 1; od return acc; }""")
    loop = next(s for s in iter_stmts(p.entry_proc.body) if isinstance(s, While))
    semi = gen_invariants(loop, ProductKind.SEMI)
    cross = gen_invariants(loop, ProductKind.CROSS)
    names = {v.name for e in cross for v in (e.left, e.right)}
    assert "acc" not in names and "i" in names
    assert all(isinstance(e, UnOp) and e.op == "!" for e in semi)
    assert len(semi) == len(cross)


def test_control_dependence_feeds_the_loop_condition():
    p = prog("""def main(pub n){ var i, lo, z, go; i := 0; lo := 0; go := 1;
        while (go) do lo := lo + 1; z := lo == 0; if (z) then i := i + 1; fi go := i < 2; od
        return i; }""")
    loop = next(s for s in iter_stmts(p.entry_proc.body) if isinstance(s, While))
    names = {e.operand.name for e in gen_invariants(loop, ProductKind.SEMI)}
    assert {"b$lo", "b$z", "b$i", "b$go"} <= names


# -- projection ----------------------------------------------------------------------

def check_projection(p, pp, inputs, width, shadow=None):
    """The product restricted to the original variables behaves like the original."""
    body = strip_guards(pp)
    log, out = states(body, product_inputs(pp, inputs, shadow), width,
                      labels=pp.origin, rename=pp.origin, hide=pp.companions)
    ref, ref_out = states(p, inputs, width)
    if out.complete:
        assert ref_out.complete
        assert log == ref
        assert project_trace(pp, out.trace) == plain_trace(ref_out.trace)
        assert out.returns == ref_out.returns
    else:
        # only a shadow assume can stop the product early
        assert out.status.value == "blocked" or out.status == ref_out.status
        assert log == ref[:len(log)]


@pytest.mark.parametrize("kind", ["semi", "cross"])
def test_projection_on_corpus(programs, kind):
    rng = random.Random(17)
    for name, p in programs.items():
        pp = BUILDERS[kind](p, analyze(p))
        for _ in range(10):
            inputs = random_inputs(p, 4, rng)
            shadow = random_inputs(p, 4, rng) if rng.random() < 0.5 else None
            check_projection(p, pp, inputs, 4, shadow)


@given(st.integers(0, 20_000), st.integers(0, 1 << 30), st.sampled_from(["semi", "cross"]))
def test_projection_on_random_programs(seed, in_seed, kind):
    p = generate_random_program(seed)
    rng = random.Random(in_seed)
    pp = BUILDERS[kind](p, analyze(p))
    check_projection(p, pp, random_inputs(p, 8, rng), 8, random_inputs(p, 8, rng))


def test_shadow_with_equal_secrets_satisfies_every_guard(programs):
    rng = random.Random(23)
    for name, p in programs.items():
        pp = build_cross_product(p, analyze(p))
        for _ in range(10):
            inputs = random_inputs(p, 4, rng)
            out = states(pp.program, product_inputs(pp, inputs), 4)[1]
            ref = states(p, inputs, 4)[1]
            assert out.status == ref.status, name


def test_loop_guard_runs_once_per_iteration_plus_exit():
    p = prog("def main(sec k){ var i; i := 0; while (i < k) do i := i + 1; od return i; }")
    pp = build_cross_product(p, analyze(p))
    roles = []
    run(pp.program, {"k": 5, "sh$k": 5}, 8, 1 << 12,
        lambda lab, s, f: roles.append(pp.guard_index[lab].role) if lab in pp.guard_index else None)
    assert roles.count(GuardRole.BEGIN) == 5 and roles.count(GuardRole.EXIT) == 1


# -- faithfulness of the Boolean product ---------------------------------------------------

def _semi_faithful(p, width, bindings):
    pp = build_semi_product(p, analyze(p))
    body = strip_guards(pp)
    groups: dict = {}
    for b in bindings:
        log, out = states(body, b, width, labels=pp.origin, rename=pp.origin)
        if not out.complete:
            continue
        key = (tuple(repr(b[k]) for k in p.public_inputs), tuple(project_trace(pp, out.trace)))
        groups.setdefault(key, []).append(log)
    for logs in groups.values():
        ref = logs[0]
        for other in logs[1:]:
            for (lab, f1), (_, f2) in zip(ref, other):
                for v, val in f1.items():
                    if v in pp.companions or not isinstance(val, int):
                        continue
                    if val != f2[v]:
                        assert f1["b$" + v] == 1 and f2["b$" + v] == 1, (lab, v)


def test_boolean_companions_flag_every_differing_value(programs):
    rng = random.Random(29)
    for name, p in programs.items():
        pub = [random_inputs(p, 4, rng) for _ in range(4)]
        bindings = []
        for _ in range(200):
            b = random_inputs(p, 4, rng)
            b.update({k: rng.choice(pub)[k] for k in p.public_inputs})
            bindings.append(b)
        _semi_faithful(p, 4, bindings)


# -- taint direction is an optimisation only -------------------------------------------------

def _final(report):
    return sorted((r.source.key, "resolved" if r.source.status.resolved else r.source.status.value)
                  for r in report.sources)


def test_all_tainted_products_give_the_same_statuses(cases, programs):
    cfg = PipelineConfig(width=4)
    for c in cases:
        p = programs[c.name]
        a = run_pipeline(p, cfg)
        b = run_pipeline(p, cfg, taint=all_tainted(p))
        capped = {r.source.key for r in b.sources if r.reason == "EnumerationCap"}
        fa = [e for e in _final(a) if e[0] not in capped]
        fb = [e for e in _final(b) if e[0] not in capped]
        assert fa == fb, c.name
        assert a.verdict == b.verdict, c.name
