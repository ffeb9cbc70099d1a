from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctprover._jit import HAVE_NUMBA
from ctprover.ast import While, iter_stmts
from ctprover.corpus import generate_random_program
from ctprover.semantics import (
    CapExceeded, EventKind, InputError, OracleLimits, Status, format_trace,
    oracle_check_ct, run, traces_prefix_equal,
)
from ctprover.semantics.compile import compile_program, inputs_to_vector
from ctprover.semantics.kernels import first_violation
from ctprover.semantics.ops import binop
from ctprover.semantics.oracle import run_inputs

from _support import plain_trace, prog, random_inputs

BRANCH = "def main(pub p){ var x; if (p < 3) then x := 1; else x := 2; fi return x; }"
LOOP = "def main(pub n){ var i; i := 0; while (i < n) do i := i + 1; od return i; }"

STATUS_CODE = {Status.COMPLETED: 1, Status.STUCK: 2, Status.BLOCKED: 3, Status.FUEL: 4}


def test_branch_emits_one_truth_event():
    out = run(prog(BRANCH), {"p": 2}, 8)
    assert out.complete and out.returns == (1,)
    assert [(e.kind, e.value) for e in out.trace] == [(EventKind.BRANCH, 1)]


@pytest.mark.parametrize("n", [0, 1, 5])
def test_loop_emits_n_plus_one_truth_events(n):
    out = run(prog(LOOP), {"n": n}, 8)
    assert [e.value for e in out.trace] == [1] * n + [0]
    assert all(e.kind is EventKind.LOOP for e in out.trace)


def test_out_of_bounds_load_gets_stuck_before_its_event():
    p = prog("def main(pub i, pub a[4]){ var x; x := a[i]; return x; }")
    out = run(p, {"i": 4, "a": [1, 2, 3, 4]}, 8)
    assert out.status is Status.STUCK and out.trace == ()
    ok = run(p, {"i": 3, "a": [1, 2, 3, 4]}, 8)
    assert ok.returns == (4,) and [e.kind for e in ok.trace] == [EventKind.LOAD]


def test_store_event_carries_the_index():
    p = prog("def main(pub i){ var x; array b[4]; b[i & 3] := 7; x := b[1]; return x; }")
    out = run(p, {"i": 5}, 8)
    assert [(e.kind, e.value) for e in out.trace] == [(EventKind.STORE, 1), (EventKind.LOAD, 1)]
    assert out.returns == (7,)


def test_division_by_zero_is_stuck_and_false_assume_blocks():
    assert run(prog("def main(pub p){ var x; x := 1 / p; return x; }"), {"p": 0}).status is Status.STUCK
    assert run(prog("def main(pub p){ assume p; return; }"), {"p": 0}).status is Status.BLOCKED


def test_fuel_exhaustion():
    p = prog("def main(pub p){ var i; i := 1; while (i) do skip; od return; }")
    assert run(p, {"p": 0}, 8, fuel=50).status is Status.FUEL


def test_shift_amount_is_taken_modulo_width():
    p = prog("def main(pub p){ var x; x := 1 << p; return x; }")
    assert run(p, {"p": 9}, 8).returns == (2,)
    assert binop(">>", 0x80, 12, 8) == 0x08


def test_arithmetic_wraps():
    p = prog("def main(pub p){ var x; x := p * 3 + 200; return x; }")
    assert run(p, {"p": 100}, 8).returns == ((300 + 200) % 256,)


def test_input_errors():
    p = prog("def main(pub p, pub a[2]){ return; }")
    with pytest.raises(InputError):
        run(p, {"a": [0, 0]})
    with pytest.raises(InputError):
        run(p, {"p": 0, "a": [0]})


def test_format_trace():
    out = run(prog(BRANCH), {"p": 9}, 8)
    label = out.trace[0].label
    assert format_trace(out.trace) == f"{label}:branch=0"


def test_traces_prefix_equal():
    t1 = run(prog(LOOP), {"n": 2}, 8).trace
    t2 = run(prog(LOOP), {"n": 3}, 8).trace
    assert traces_prefix_equal(t1, t1) is None
    assert traces_prefix_equal(t1, t2) == 2
    assert traces_prefix_equal(t1[:2], t1) == 2


def test_calls_share_arrays_by_reference():
    p = prog("""
        def put(a[2], v){ var r; a[1] := v; r := 0; return r; }
        def main(pub p){ var x, r; array b[2]; r := put(b, p); x := b[1]; return x; }""")
    assert run(p, {"p": 42}).returns == (42,)


# -- oracle -------------------------------------------------------------------------

def test_oracle_finds_one_bit_branch_leak():
    p = prog("def main(sec k){ var x; if (k & 1) then x := 1; fi return x; }")
    res = oracle_check_ct(p, 4)
    assert not res.secure and res.exhaustive
    assert res.inputs1 == {"k": 0} and res.inputs2 == {"k": 1}
    assert res.position == 0


def test_oracle_accepts_constant_time_select():
    p = prog("def main(pub a, pub b, sec k){ var m, r; m := 0 - (k & 1); "
             "r := (a & m) | (b & ~m); return r; }")
    res = oracle_check_ct(p, 4)
    assert res.secure and res.exhaustive and res.runs == 1 << 12


def test_oracle_ignores_runs_that_do_not_complete():
    p = prog("def main(sec k){ assume k == 3; if (k) then skip; fi return; }")
    res = oracle_check_ct(p, 4)
    assert res.secure and res.complete_runs == 1


def test_oracle_cap():
    p = prog("def main(pub a, sec k){ var x; x := a + k; return x; }")
    with pytest.raises(CapExceeded):
        oracle_check_ct(p, 16, OracleLimits(require_exhaustive=True))
    assert oracle_check_ct(p, 16, OracleLimits(max_pairs=2000)).secure


def test_oracle_on_corpus_matches_expectation(cases, programs):
    for c in cases:
        res = oracle_check_ct(programs[c.name], c.width)
        if c.verdict == "proved":
            assert res.secure, c.name
        elif c.verdict == "leaks_found":
            assert not res.secure, c.name


@given(st.integers(0, 5000))
def test_oracle_witness_is_consistent(seed):
    p = generate_random_program(seed, 6)
    res = oracle_check_ct(p, 4, OracleLimits(max_pairs=4000))
    if not res.secure:
        assert res.run1.complete and res.run2.complete
        assert traces_prefix_equal(res.run1.trace, res.run2.trace) == res.position
        pub = p.public_inputs
        assert {k: res.inputs1[k] for k in pub} == {k: res.inputs2[k] for k in pub}


# -- properties -----------------------------------------------------------------------

@given(st.integers(0, 10_000), st.integers(0, 1 << 30))
def test_runs_are_deterministic(seed, in_seed):
    p = generate_random_program(seed)
    inputs = random_inputs(p, 8, random.Random(in_seed))
    assert run(p, inputs, 8) == run(p, inputs, 8)


@given(st.integers(0, 10_000), st.integers(0, 1 << 30))
def test_every_loop_evaluation_is_observed(seed, in_seed):
    p = generate_random_program(seed, features={"loops", "branches"})
    loops = {s.label for q in p.procedures for s in iter_stmts(q.body) if isinstance(s, While)}
    seen: list[int] = []
    out = run(p, random_inputs(p, 8, random.Random(in_seed)), 8, 1 << 16,
              lambda lab, s, f: seen.append(lab) if lab in loops else None)
    assert seen == [e.label for e in out.trace if e.kind is EventKind.LOOP]


@given(st.integers(0, 10_000), st.integers(0, 1 << 30))
def test_equal_traces_mean_equal_control_flow(seed, in_seed):
    p = generate_random_program(seed, 6)
    rng = random.Random(in_seed)
    runs = []
    for _ in range(12):
        path: list[int] = []
        out = run(p, random_inputs(p, 4, rng), 4, 1 << 16, lambda lab, s, f: path.append(lab))
        if out.complete:
            runs.append((out.trace, path))
    for t1, p1 in runs:
        for t2, p2 in runs:
            if t1 == t2:
                assert p1 == p2


# -- batch kernels ----------------------------------------------------------------------

def _kernel_agrees(p, width, bindings, use_numba):
    res = run_inputs(p, bindings, width, 1 << 14, use_numba)
    outs = [run(p, b, width, 1 << 14) for b in bindings]
    by_trace: dict = {}
    for i, out in enumerate(outs):
        if out.status is Status.FUEL:
            continue  # the kernel counts steps at instruction granularity
        assert res["status"][i] == STATUS_CODE[out.status]
        if out.complete:
            assert res["events"][i] == len(out.trace)
            key = tuple(plain_trace(out.trace))
            h = by_trace.setdefault(key, int(res["hash"][i]))
            assert h == int(res["hash"][i])
    hashes = {}
    for key, h in by_trace.items():
        assert hashes.setdefault(h, key) == key


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=pytest.mark.skipif(
    not HAVE_NUMBA, reason="numba disabled"))])
@given(st.integers(0, 10_000), st.integers(0, 1 << 30))
def test_batch_kernel_matches_interpreter(use_numba, seed, in_seed):
    p = generate_random_program(seed)
    rng = random.Random(in_seed)
    width = rng.choice((4, 8, 32))
    _kernel_agrees(p, width, [random_inputs(p, width, rng) for _ in range(16)], use_numba)


def test_batch_kernel_on_corpus(programs):
    rng = random.Random(3)
    for name, p in programs.items():
        bindings = [random_inputs(p, 4, rng) for _ in range(32)]
        _kernel_agrees(p, 4, bindings, False)
        if HAVE_NUMBA:
            _kernel_agrees(p, 4, bindings, True)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba disabled")
@given(st.integers(0, 10_000))
def test_numba_and_numpy_kernels_agree_exactly(seed):
    p = generate_random_program(seed)
    rng = random.Random(seed)
    bindings = [random_inputs(p, 8, rng) for _ in range(24)]
    a = run_inputs(p, bindings, 8, 1 << 14, use_numba=True)
    b = run_inputs(p, bindings, 8, 1 << 14, use_numba=False)
    for k in ("status", "hash", "events"):
        assert np.array_equal(a[k], b[k]), k


def test_first_violation_kernels_agree():
    from ctprover.verifier.backends import compile_formula
    from ctprover.verifier.terms import TermManager

    tm = TermManager(4)
    x, y = tm.sym("x"), tm.sym("y")
    f = tm.bin("!=", tm.bin("*", x, y), tm.const(6))
    c, _ = compile_formula(tm, f)
    rows = np.array([[a, b] for a in range(16) for b in range(16)], dtype=np.uint64)
    expect = next(i for i, (a, b) in enumerate(rows) if (int(a) * int(b)) % 16 == 6)
    assert first_violation(c, rows, use_numba=False) == expect
    if HAVE_NUMBA:
        assert first_violation(c, rows, use_numba=True) == expect
    ok = rows[[i for i, (a, b) in enumerate(rows) if (int(a) * int(b)) % 16 != 6]]
    assert first_violation(c, ok, use_numba=False) == -1


def test_compiled_inputs_layout():
    p = prog("def main(pub p, sec k[2]){ return; }")
    c = compile_program(p, 8)
    assert inputs_to_vector(c, {"p": 1, "k": [2, 3]}) == [1, 2, 3]
    assert c.input_bits() == 24
