from __future__ import annotations

import os
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from ctprover.corpus import generate_random_program
from ctprover.product import (
    CandidateStatus, all_tainted, build_cross_product, build_semi_product,
)
from ctprover.semantics import Status, oracle_check_ct, run
from ctprover.semantics.ops import binop, unop
from ctprover.taint import analyze
from ctprover.verifier import (
    VALID, ConfirmedLeak, EnumerateBackend, Mode, SmtLibBackend, SolverSpawnError, Spurious,
    TermManager, UnknownReason, VCConfig, VCKind, check, find_solver, gen_vcs, make_backend,
    parse_model, prune_invariants, split_model, to_smtlib, verify_guards, witness_replay,
)
from ctprover.verifier.terms import InlineBlowup

from _support import prog, strip_guards

ENUM = EnumerateBackend()
SOLVER = find_solver()
needs_solver = pytest.mark.skipif(SOLVER is None, reason="no SMT solver on PATH")

BIN_OPS = ["+", "-", "*", "&", "|", "^", "<<", ">>", "==", "!=", "<", "<=", ">", ">=",
           "&&", "||", "/", "%"]


# -- terms --------------------------------------------------------------------------

def test_xor_cancels():
    tm = TermManager(8)
    a, b = tm.sym("a"), tm.sym("b")
    assert tm.bin("^", tm.bin("^", a, b), a) == b
    assert tm.bin("^", a, a) == tm.const(0)


def test_constants_fold_and_terms_are_shared():
    tm = TermManager(8)
    assert tm.value(tm.bin("+", tm.const(250), tm.const(10))) == 4
    a = tm.sym("a")
    assert tm.bin("+", a, tm.const(1)) == tm.bin("+", a, tm.const(1))
    assert tm.ite(tm.const(1), a, tm.const(3)) == a


def test_term_budget():
    tm = TermManager(8, max_terms=10)
    with pytest.raises(InlineBlowup):
        t = tm.sym("a")
        for i in range(20):
            t = tm.bin("*", t, tm.sym(f"s{i}"))


@given(st.sampled_from(BIN_OPS), st.integers(0, 255), st.integers(0, 255),
       st.sampled_from([4, 8]), st.booleans(), st.booleans())
def test_term_evaluation_matches_concrete_ops(op, x, y, width, cx, cy):
    tm = TermManager(width)
    m = (1 << width) - 1
    x, y = x & m, y & m
    sa, sb = tm.sym("a"), tm.sym("b")
    a = tm.const(x) if cx else sa
    b = tm.const(y) if cy else sb
    t = tm.bin(op, a, b)
    env = {sa: x, sb: y}
    assert tm.evaluate(t, env) == binop(op, x, y, width, total=True)


@given(st.sampled_from(["~", "!", "-"]), st.integers(0, 15))
def test_unary_evaluation(op, x):
    tm = TermManager(4)
    a = tm.sym("a")
    assert tm.evaluate(tm.un(op, a), {a: x}) == unop(op, x, 4)


# -- VC generation ---------------------------------------------------------------------

def _cross(text):
    p = prog(text)
    return build_cross_product(p, analyze(p))


def test_loop_free_program_has_one_vc_per_guard():
    pp = _cross("def main(pub p, sec k, pub a[4]){ var x, y; x := k & 3; y := a[x]; "
                "if (y) then skip; fi return; }")
    vcs = gen_vcs(pp, 4)
    assert len(pp.guard_index) == 1
    assert [vc.kind for vc in vcs] == [VCKind.GUARD]


def test_vc_count_with_one_loop():
    pp = _cross("""def main(pub n, sec k){ var i, j; i := 0;
        while (i < n) do j := i + 1; i := j; od if (k) then skip; fi return; }""")
    cands = pp.candidate_invariants
    (lab, cs), = cands.items()
    vcs = gen_vcs(pp, 4)
    kinds = [vc.kind for vc in vcs]
    assert len(cs) == 3  # i, j and the condition temporary
    assert kinds.count(VCKind.INIT) == len(cs) == kinds.count(VCKind.INDUCTIVE)
    assert kinds.count(VCKind.GUARD) == len(pp.guard_index)


def test_bmc_with_zero_unrolling_fails_the_unwinding_check():
    pp = _cross("def main(pub n, sec k){ var i; i := 0; while (i < n) do i := i + 1; od "
                "if (k) then skip; fi return; }")
    vcs = gen_vcs(pp, 4, VCConfig(mode=Mode.BMC, unroll=0))
    unwind = [vc for vc in vcs if vc.kind is VCKind.UNWIND]
    assert len(unwind) == 1 and check(unwind[0], ENUM).invalid
    vcs = gen_vcs(pp, 4, VCConfig(mode=Mode.BMC, unroll=16))
    assert all(check(vc, ENUM).valid for vc in vcs if vc.kind is VCKind.UNWIND)


# -- deciding VCs -------------------------------------------------------------------------

def test_equality_guard_counterexample_is_the_least_model():
    pp = _cross("def main(sec k){ if (k) then skip; fi return; }")
    vc, = gen_vcs(pp, 4)
    v = check(vc, ENUM)
    assert v.invalid and v.model == {"k": 0, "sh$k": 1}


def test_constant_companion_is_valid():
    # with every variable claimed tainted, the guard on x still reads b$x == 0
    p = prog("def main(pub p, sec k){ var x; x := p; if (x) then skip; fi return; }")
    pp = build_semi_product(p, all_tainted(p))
    vcs = gen_vcs(pp, 4)
    assert vcs and all(check(vc, ENUM).valid for vc in vcs)


def test_xor_cancellation_is_proved():
    p = prog("def main(pub p, sec k){ var x; x := p ^ k; x := x ^ k; if (x) then skip; fi return; }")
    t = analyze(p)
    semi = build_semi_product(p, t)
    assert not all(check(vc, ENUM).valid for vc in gen_vcs(semi, 4))
    cross = build_cross_product(p, t)
    assert all(check(vc, ENUM).valid for vc in gen_vcs(cross, 4))


def test_prune_keeps_public_counters_and_drops_secret_ones():
    p = prog("""def main(pub n, sec k){ var i, j; i := 0; j := 0;
        while (i < n) do i := i + 1; j := j + k; if (j) then skip; fi od return; }""")
    for build in (build_semi_product, build_cross_product):
        pp = prune_invariants(build(p, analyze(p)), ENUM, 4)
        (lab, cs), = pp.candidate_invariants.items()
        status = {str(c.expr): c.status for c in cs}
        kept = [s for s, st_ in status.items() if st_ is CandidateStatus.CONFIRMED]
        assert any("i" in s and "j" not in s for s in kept), status
        assert all(st_ is not CandidateStatus.CANDIDATE for st_ in status.values())


def test_prune_without_loops_is_a_no_op():
    pp = _cross("def main(sec k){ if (k) then skip; fi return; }")
    assert prune_invariants(pp, ENUM, 4).candidate_invariants == {}


def test_while_guards_need_both_begin_and_exit():
    p = prog("def main(pub n, sec k){ var i; i := 0; while (i < n) do i := i + 1; od return; }")
    pp = prune_invariants(build_cross_product(p, analyze(p)), ENUM, 4)
    assert not pp.guard_index  # public loop bound: nothing to check


def test_verify_guards_on_chacha_index(programs):
    p = programs["example2_chacha_ctx"]
    pp = prune_invariants(build_semi_product(p, analyze(p)), ENUM, 4)
    v = verify_guards(pp, ENUM, 4, bmc=False)
    assert v and all(x.valid for x in v.values())


def test_verify_guards_finds_the_leaky_branch():
    pp = _cross("def main(pub p, sec k){ var x; x := k & 1; if (x) then skip; fi return; }")
    v = verify_guards(prune_invariants(pp, ENUM, 4), ENUM, 4)
    (lab, verdict), = v.items()
    assert verdict.invalid
    assert (verdict.model["k"] & 1) != (verdict.model["sh$k"] & 1)


def test_bmc_reports_unwind_bound():
    pp = _cross("""def main(pub n, sec k){ var i, s; i := 0; s := 0;
        while (i < n) do s := s ^ k; s := s ^ k; i := i + 1; od if (s) then skip; fi return; }""")
    pp = prune_invariants(pp, ENUM, 4)
    v = verify_guards(pp, ENUM, 4, unroll=2)
    assert [x.reason for x in v.values()] == [UnknownReason.UNWIND_BOUND_HIT]
    v = verify_guards(pp, ENUM, 4, unroll=16)
    assert all(x.valid for x in v.values())


def test_semi_stage_never_reports_invalid():
    pp = build_semi_product(*(lambda p: (p, analyze(p)))(prog(
        "def main(sec k){ if (k) then skip; fi return; }")))
    v = verify_guards(pp, ENUM, 4, bmc=False)
    assert all(not x.invalid for x in v.values())


def test_invalid_guard_models_violate_that_guard(cases, programs):
    for c in cases:
        if c.verdict != "leaks_found":
            continue
        p = programs[c.name]
        pp = prune_invariants(build_cross_product(p, analyze(p)), ENUM, 4)
        for lab, v in verify_guards(pp, ENUM, 4).items():
            if not v.invalid:
                continue
            only = strip_guards(pp, keep=frozenset({lab}))
            out = run(only, v.model, 4, 1 << 16)
            assert out.status is Status.STUCK and out.label == lab, (c.name, lab)


def test_fewer_invariants_never_turn_valid_into_invalid(cases, programs):
    for c in cases:
        p = programs[c.name]
        pp = prune_invariants(build_cross_product(p, analyze(p)), ENUM, 4)
        full = verify_guards(pp, ENUM, 4)
        bare = {lab: [type(cs[0])(x.expr, CandidateStatus.DROPPED) for x in cs]
                for lab, cs in pp.candidate_invariants.items()}
        weak = verify_guards(replace(pp, candidate_invariants=bare), ENUM, 4)
        for lab, v in full.items():
            if v.valid:
                assert not weak[lab].invalid, (c.name, lab)


def test_all_valid_guards_mean_the_oracle_agrees(cases, programs):
    for c in cases:
        p = programs[c.name]
        pp = prune_invariants(build_cross_product(p, analyze(p)), ENUM, 4)
        v = verify_guards(pp, ENUM, 4)
        if all(x.valid for x in v.values()):
            assert oracle_check_ct(p, 4).secure, c.name


# -- witnesses ----------------------------------------------------------------------------

def test_witness_replay_confirms_a_leak():
    pp = _cross("def main(pub p, sec k){ if (k) then skip; fi return; }")
    w = witness_replay(pp, {"p": 3, "k": 0, "sh$k": 1}, 4)
    assert isinstance(w, ConfirmedLeak)
    assert w.index == 0 and w.inputs1["p"] == w.inputs2["p"] == 3
    assert w.trace1[0].value != w.trace2[0].value


def test_witness_replay_reports_spurious_models(programs):
    p = programs["spurious_truthy_branch"]
    pp = prune_invariants(build_cross_product(p, analyze(p)), ENUM, 4)
    v = verify_guards(pp, ENUM, 4)
    models = [x.model for x in v.values() if x.invalid]
    assert models
    assert all(isinstance(witness_replay(pp, m, 4), Spurious) for m in models)


def test_split_model_rejects_the_boolean_product():
    p = prog("def main(sec k){ if (k) then skip; fi return; }")
    pp = build_semi_product(p, analyze(p))
    with pytest.raises(ValueError):
        split_model(pp, {"k": 0})
    with pytest.raises(ValueError):
        witness_replay(pp, {"k": 0})


# -- SMT-LIB ----------------------------------------------------------------------------------

def test_smtlib_text():
    pp = _cross("def main(pub p, sec k){ var x; x := k & 1; if (x) then skip; fi return; }")
    vc, = gen_vcs(pp, 8)
    text = to_smtlib(vc)
    assert text.startswith("(set-logic QF_BV)")
    assert "(declare-const |k| (_ BitVec 8))" in text
    assert "(declare-const |sh$k| (_ BitVec 8))" in text
    assert "(check-sat)" in text


def test_parse_model_literals():
    text = """sat
    ((define-fun k () (_ BitVec 8) #x1f)
     (define-fun |sh$k| () (_ BitVec 8) #b00000001)
     (define-fun p () (_ BitVec 8) (_ bv7 8)))"""
    assert parse_model(text) == {"k": 31, "sh$k": 1, "p": 7}
    assert parse_model(text, {"k"}) == {"k": 31}


def test_missing_solver_is_a_spawn_error():
    with pytest.raises(SolverSpawnError):
        make_backend("cmd:/nonexistent/solver")


@needs_solver
def test_emit_smt_writes_one_file_per_vc(tmp_path):
    pp = _cross("def main(sec k){ if (k) then skip; fi return; }")
    be = SmtLibBackend(SOLVER, emit_dir=str(tmp_path))
    vc, = gen_vcs(pp, 4)
    assert check(vc, be).invalid
    assert os.listdir(tmp_path) == [f"vc_{vc.id}.smt2"]


@needs_solver
@given(st.integers(0, 20_000))
def test_enumeration_and_smt_agree_on_random_programs(seed):
    p = generate_random_program(seed, 6)
    smt = SmtLibBackend(SOLVER)
    for build in (build_semi_product, build_cross_product):
        pp = build(p, analyze(p))
        for mode in (VCConfig(), VCConfig(mode=Mode.BMC, unroll=4)):
            try:
                vcs = gen_vcs(pp, 4, mode)
            except InlineBlowup:
                continue
            for vc in vcs:
                a, b = check(vc, ENUM), check(vc, smt)
                if a.kind.value == "unknown" or b.kind.value == "unknown":
                    continue
                assert a.kind == b.kind, vc.id
