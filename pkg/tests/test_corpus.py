from __future__ import annotations

import os
import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from ctprover.ast import Assert, Call, Load, Store, Var, While, iter_stmts
from ctprover.corpus import (
    FEATURES, check_case, generate_random_program, load_manifest, random_program_text,
)
from ctprover.frontend import load_program, pretty_print
from ctprover.pipeline import PipelineConfig
from ctprover.semantics import run

from _support import CORPUS, random_inputs


def _stmts(p):
    return [s for q in p.procedures for s in iter_stmts(q.body)]


def test_manifest_lists_every_corpus_file(cases):
    files = {f[:-3] for f in os.listdir(CORPUS) if f.endswith(".wh")}
    assert {c.name for c in cases} == files
    assert len(cases) >= 25
    assert {c.verdict for c in cases} == {"proved", "leaks_found", "inconclusive"}
    assert all(c.leaks for c in cases if c.verdict == "leaks_found")


def test_manifest_errors(tmp_path):
    bad = tmp_path / "m.txt"
    bad.write_text('x = "sure 1:-:- 4"\n')
    with pytest.raises(ValueError):
        load_manifest(str(bad))
    bad.write_text("x = proved\n")
    with pytest.raises(ValueError):
        load_manifest(str(bad))


@pytest.mark.parametrize("name", ["leaky_branch", "xor_false_positive", "example2_chacha_ctx"])
def test_check_case(cases, name):
    case = next(c for c in cases if c.name == name)
    res = check_case(case, PipelineConfig())
    assert res.passed, res.mismatches
    assert res.oracle_secure is (case.verdict == "proved")


def test_check_case_reports_mismatches(cases):
    case = replace(next(c for c in cases if c.name == "leaky_branch"), verdict="proved",
                   profile="1:-:-")
    res = check_case(case, oracle=True)
    assert not res.passed and len(res.mismatches) >= 3


def test_branch_only_generation():
    p = generate_random_program(1, 10, features={"branches"})
    kinds = {type(s) for s in _stmts(p)}
    assert not kinds & {While, Load, Store, Call}
    assert p.secret_inputs


def test_array_generation_has_a_checked_load():
    p = generate_random_program(2, 10, features={"arrays"})
    body = p.entry_proc.body.stmts
    loads = [i for i, s in enumerate(body) if isinstance(s, Load)]
    assert loads
    for i in loads:
        if isinstance(body[i].index, Var):
            assert isinstance(body[i - 1], Assert)


def test_generation_is_deterministic():
    assert random_program_text(42) == random_program_text(42)
    assert random_program_text(42) != random_program_text(43)


@given(st.integers(0, 100_000), st.sets(st.sampled_from(sorted(FEATURES))))
def test_generated_programs_round_trip_and_terminate(seed, features):
    p = generate_random_program(seed, 10, features)
    assert load_program(pretty_print(p)) == p
    out = run(p, random_inputs(p, 8, random.Random(seed)), 8, 1 << 16)
    assert out.status.value != "fuel_exhausted"


def test_thousand_generated_programs_round_trip():
    for seed in range(1000):
        p = generate_random_program(seed)
        assert load_program(pretty_print(p)) == p, seed
