"""Brute-force constant-time oracle over small input spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ast import Program
from .compile import (
    ST_COMPLETED, Compiled, compile_program, fill_inputs, vector_to_inputs,
)
from .interp import DEFAULT_FUEL, RunOutcome, run, traces_prefix_equal
from .kernels import run_batch


class CapExceeded(RuntimeError):
    """Exhaustive enumeration was demanded but the input space is too large."""


@dataclass(frozen=True)
class OracleLimits:
    exhaustive_bits: int = 20     # enumerate everything up to this many input bits
    max_pairs: int = 1_000_000    # pair budget for sampling mode
    seed: int = 7
    public_samples: int = 64
    require_exhaustive: bool = False
    fuel: int = 1 << 16


@dataclass(frozen=True)
class Secure:
    exhaustive: bool
    runs: int
    complete_runs: int

    @property
    def secure(self) -> bool:
        return True


@dataclass(frozen=True)
class Witness:
    inputs1: dict
    inputs2: dict
    position: int
    run1: RunOutcome
    run2: RunOutcome
    exhaustive: bool

    @property
    def secure(self) -> bool:
        return False


OracleResult = Secure | Witness


def _enumerate_rows(c: Compiled) -> np.ndarray:
    """All input vectors in lexicographic order (first element most significant)."""
    n_el = sum(s.length for s in c.inputs)
    total = n_el * c.width
    idx = np.arange(1 << total, dtype=np.uint64)
    m = np.uint64((1 << c.width) - 1)
    cols = [(idx >> np.uint64((n_el - 1 - j) * c.width)) & m for j in range(n_el)]
    if not cols:
        return np.zeros((1, 0), dtype=np.uint64)
    return np.stack(cols, axis=1)


def _secret_columns(c: Compiled, program: Program) -> np.ndarray:
    secret = set(program.secret_inputs)
    flags: list[bool] = []
    for s in c.inputs:
        flags.extend([s.name in secret] * s.length)
    return np.asarray(flags, dtype=bool)


def _sample_rows(c: Compiled, secret_cols: np.ndarray, limits: OracleLimits) -> np.ndarray:
    """Stratified sample: a few public points, many secrets per point."""
    rng = np.random.default_rng(limits.seed)
    n_el = len(secret_cols)
    hi = 1 << c.width
    n_pub_bits = int((~secret_cols).sum()) * c.width
    n_pub = max(1, min(limits.public_samples, 1 << min(n_pub_bits, 62)))
    per_pub_pairs = max(1, limits.max_pairs // n_pub)
    # choose s so that s*(s-1)/2 <= per_pub_pairs
    s = max(2, int((1 + np.sqrt(1 + 8 * per_pub_pairs)) // 2))
    s = min(s, 4096)
    blocks = []
    for _ in range(n_pub):
        pub = rng.integers(0, hi, size=n_el, dtype=np.uint64)
        rows = rng.integers(0, hi, size=(s, n_el), dtype=np.uint64)
        rows[:, ~secret_cols] = pub[~secret_cols]
        # include the all-zero and all-ones secrets as strata boundaries
        rows[0, secret_cols] = 0
        rows[1, secret_cols] = hi - 1
        blocks.append(rows)
    rows = np.unique(np.concatenate(blocks), axis=0)  # also sorts lexicographically
    return rows


def _run_rows(c: Compiled, rows: np.ndarray, fuel: int, use_numba: bool | None):
    mem = c.memory(rows.shape[0])
    fill_inputs(c, mem, rows)
    return run_batch(c, mem, fuel, use_numba=use_numba)


def _first_witness(rows: np.ndarray, secret_cols: np.ndarray, res: dict):
    """Lexicographically least violating pair among complete runs, or None."""
    ok = res["status"] == ST_COMPLETED
    if not ok.any():
        return None
    pub = rows[:, ~secret_cols]
    order = np.arange(rows.shape[0])[ok]
    keys = {}
    first: dict = {}
    best = None
    h = res["hash"]
    ev = res["events"]
    # group rows by public part, tracking the first complete row of each group
    for r in order:
        k = pub[r].tobytes()
        if k not in first:
            first[k] = r
            keys[k] = (h[r], ev[r])
            continue
        if best is not None and first[k] >= best[0]:
            continue
        if (h[r], ev[r]) != keys[k]:
            cand = (first[k], r)
            if best is None or cand < best:
                best = cand
    return best


def oracle_check_ct(program: Program, width: int = 4, limits: OracleLimits | None = None,
                    use_numba: bool | None = None) -> OracleResult:
    """Decide constant-time security by running all (or sampled) inputs.

    Runs that do not complete (stuck, blocked, out of fuel) are ignored. The
    returned witness is the least violating pair in row order, which is
    lexicographic order of the input vector in exhaustive mode.
    """
    limits = limits or OracleLimits()
    c = compile_program(program, width)
    secret_cols = _secret_columns(c, program)
    bits = c.input_bits()
    exhaustive = bits <= limits.exhaustive_bits
    if not exhaustive and limits.require_exhaustive:
        raise CapExceeded(f"{bits} input bits exceed the exhaustive cap of {limits.exhaustive_bits}")
    rows = _enumerate_rows(c) if exhaustive else _sample_rows(c, secret_cols, limits)
    res = _run_rows(c, rows, limits.fuel, use_numba)
    best = _first_witness(rows, secret_cols, res)
    n_ok = int((res["status"] == ST_COMPLETED).sum())
    if best is None:
        return Secure(exhaustive, int(rows.shape[0]), n_ok)
    in1 = vector_to_inputs(c, rows[best[0]])
    in2 = vector_to_inputs(c, rows[best[1]])
    r1 = run(program, in1, width=width, fuel=limits.fuel)
    r2 = run(program, in2, width=width, fuel=limits.fuel)
    pos = traces_prefix_equal(r1.trace, r2.trace)
    if pos is None:  # pragma: no cover - only on a 64-bit hash collision
        raise AssertionError("trace hashes differ but traces are equal")
    return Witness(in1, in2, pos, r1, r2, exhaustive)


def run_inputs(program: Program, bindings: list[dict], width: int = 8,
               fuel: int = DEFAULT_FUEL, use_numba: bool | None = None) -> dict[str, np.ndarray]:
    """Run many input bindings through the batch kernel (used by tests and benches)."""
    from .compile import inputs_to_vector

    c = compile_program(program, width)
    rows = np.asarray([inputs_to_vector(c, b) for b in bindings], dtype=np.uint64)
    rows = rows.reshape(len(bindings), -1)
    m = np.uint64((1 << width) - 1) if width < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    rows &= m
    res = _run_rows(c, rows, fuel, use_numba)
    res["compiled"] = c
    return res
