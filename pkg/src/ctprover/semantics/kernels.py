"""Batch bytecode interpreters.

``run_code_numba`` runs one row at a time under ``@njit``.
``run_code_numpy`` executes all rows in lock-step over masked lanes,
always advancing the lanes with the smallest program counter. Both return
identical results; :func:`run_batch` picks one according to ``HAVE_NUMBA``.
"""

from __future__ import annotations

import numpy as np

from .._jit import HAVE_NUMBA, njit
from .compile import (
    ASSERT, ASSUME, BIN, BR, EV_BRANCH, EV_LOAD, EV_LOOP, EV_STORE, HALT, ITE,
    JMP, LOAD, LOOP, MOV, NOP, ST_BLOCKED, ST_COMPLETED, ST_FUEL, ST_RUNNING,
    ST_STUCK, STORE, TOTAL, UN, Compiled,
)

FNV_OFFSET = np.uint64(0xCBF29CE484222325)
FNV_PRIME = np.uint64(0x100000001B3)


# -- scalar kernel ------------------------------------------------------------

@njit(cache=False)
def _mix(h, x):
    return (h ^ x) * np.uint64(0x100000001B3)


@njit(cache=False)
def _bin(sub, x, y, mask, width):
    """Returns (value, trapped)."""
    total = sub >= 64
    op = sub - 64 if total else sub
    one = np.uint64(1)
    zero = np.uint64(0)
    if op == 0:
        return (x + y) & mask, False
    if op == 1:
        return (x - y) & mask, False
    if op == 2:
        return (x * y) & mask, False
    if op == 3 or op == 4:
        if y == zero:
            if not total:
                return zero, True
            return (mask if op == 3 else x), False
        return (x // y if op == 3 else x % y), False
    if op == 5:
        return x & y, False
    if op == 6:
        return x | y, False
    if op == 7:
        return x ^ y, False
    if op == 8:
        return (x << (y % np.uint64(width))) & mask, False
    if op == 9:
        return x >> (y % np.uint64(width)), False
    if op == 10:
        return one if x == y else zero, False
    if op == 11:
        return one if x != y else zero, False
    if op == 12:
        return one if x < y else zero, False
    if op == 13:
        return one if x <= y else zero, False
    if op == 14:
        return one if x > y else zero, False
    if op == 15:
        return one if x >= y else zero, False
    if op == 16:
        return one if (x != zero and y != zero) else zero, False
    return one if (x != zero or y != zero) else zero, False


@njit(cache=False)
def _un(sub, x, mask):
    if sub == 0:
        return (~x) & mask
    if sub == 1:
        return np.uint64(1) if x == np.uint64(0) else np.uint64(0)
    return (np.uint64(0) - x) & mask


@njit(cache=False)
def run_code_numba(code, mem, width, fuel, status, pcs, hashes, nevents, steps):
    mask = np.uint64(0xFFFFFFFFFFFFFFFF) if width == 64 else np.uint64((1 << width) - 1)
    for r in range(mem.shape[0]):
        m = mem[r]
        pc = 0
        h = np.uint64(0xCBF29CE484222325)
        nev = 0
        st = 0
        used = 0
        while True:
            op = code[pc, 0]
            if code[pc, 6] != 0:
                if used >= fuel:
                    st = ST_FUEL
                    break
                used += 1
            a = code[pc, 1]
            b = code[pc, 2]
            c = code[pc, 3]
            d = code[pc, 4]
            if op == MOV:
                m[a] = m[b]
            elif op == BIN:
                v, trap = _bin(d, m[b], m[c], mask, width)
                if trap:
                    st = ST_STUCK
                    break
                m[a] = v
            elif op == UN:
                m[a] = _un(d, m[b], mask)
            elif op == ITE:
                m[a] = m[c] if m[b] != np.uint64(0) else m[d]
            elif op == LOAD:
                idx = m[c]
                h = _mix(_mix(_mix(h, np.uint64(EV_LOAD)), np.uint64(code[pc, 5])), idx)
                nev += 1
                if idx >= np.uint64(d):
                    st = ST_STUCK
                    break
                m[a] = m[b + np.int64(idx)]
            elif op == STORE:
                idx = m[b]
                h = _mix(_mix(_mix(h, np.uint64(EV_STORE)), np.uint64(code[pc, 5])), idx)
                nev += 1
                if idx >= np.uint64(d):
                    st = ST_STUCK
                    break
                m[a + np.int64(idx)] = m[c]
            elif op == BR or op == LOOP:
                t = np.uint64(1) if m[a] != np.uint64(0) else np.uint64(0)
                kind = EV_BRANCH if op == BR else EV_LOOP
                h = _mix(_mix(_mix(h, np.uint64(kind)), np.uint64(code[pc, 5])), t)
                nev += 1
                if t == np.uint64(0):
                    pc = b
                    continue
            elif op == JMP:
                pc = b
                continue
            elif op == ASSERT:
                if m[a] == np.uint64(0):
                    st = ST_STUCK
                    break
            elif op == ASSUME:
                if m[a] == np.uint64(0):
                    st = ST_BLOCKED
                    break
            elif op == HALT:
                st = ST_COMPLETED
                break
            pc += 1
        status[r] = st
        pcs[r] = pc
        hashes[r] = h
        nevents[r] = nev
        steps[r] = used


# -- vectorized kernel ---------------------------------------------------------

def _bin_vec(sub: int, x: np.ndarray, y: np.ndarray, mask: np.uint64, width: int):
    total = sub >= TOTAL
    op = sub - TOTAL if total else sub
    trap = None
    with np.errstate(all="ignore"):
        if op == 0:
            v = (x + y) & mask
        elif op == 1:
            v = (x - y) & mask
        elif op == 2:
            v = (x * y) & mask
        elif op in (3, 4):
            zero = y == 0
            safe = np.where(zero, np.uint64(1), y)
            v = x // safe if op == 3 else x % safe
            if total:
                v = np.where(zero, mask if op == 3 else x, v)
            else:
                trap = zero
        elif op == 5:
            v = x & y
        elif op == 6:
            v = x | y
        elif op == 7:
            v = x ^ y
        elif op == 8:
            v = (x << (y % np.uint64(width))) & mask
        elif op == 9:
            v = x >> (y % np.uint64(width))
        else:
            cmp = {
                10: np.equal, 11: np.not_equal, 12: np.less, 13: np.less_equal,
                14: np.greater, 15: np.greater_equal,
            }
            if op in cmp:
                v = cmp[op](x, y)
            elif op == 16:
                v = (x != 0) & (y != 0)
            else:
                v = (x != 0) | (y != 0)
            v = v.astype(np.uint64)
    return v.astype(np.uint64, copy=False), trap


def _un_vec(sub: int, x: np.ndarray, mask: np.uint64) -> np.ndarray:
    with np.errstate(all="ignore"):
        if sub == 0:
            return (~x) & mask
        if sub == 1:
            return (x == 0).astype(np.uint64)
        return (np.uint64(0) - x) & mask


def _mix_vec(h: np.ndarray, x) -> np.ndarray:
    with np.errstate(all="ignore"):
        return (h ^ x) * FNV_PRIME


def run_code_numpy(code, mem, width, fuel, status, pcs, hashes, nevents, steps):
    mask = np.uint64((1 << width) - 1)
    n = mem.shape[0]
    pc = np.zeros(n, dtype=np.int64)
    h = np.full(n, FNV_OFFSET, dtype=np.uint64)
    nev = np.zeros(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.int64)
    st = np.zeros(n, dtype=np.int64)
    rows_all = np.arange(n)
    while True:
        live = st == ST_RUNNING
        if not live.any():
            break
        p = int(pc[live].min())
        rows = rows_all[live & (pc == p)]
        op, a, b, c, d, lab, tick = (int(v) for v in code[p])
        if tick:
            out = used[rows] >= fuel
            if out.any():
                st[rows[out]] = ST_FUEL
                rows = rows[~out]
            used[rows] += 1
        nxt = p + 1
        if op == MOV:
            mem[rows, a] = mem[rows, b]
        elif op == BIN:
            v, trap = _bin_vec(d, mem[rows, b], mem[rows, c], mask, width)
            if trap is not None and trap.any():
                st[rows[trap]] = ST_STUCK
                pc[rows[trap]] = p
                rows, v = rows[~trap], v[~trap]
            mem[rows, a] = v
        elif op == UN:
            mem[rows, a] = _un_vec(d, mem[rows, b], mask)
        elif op == ITE:
            mem[rows, a] = np.where(mem[rows, b] != 0, mem[rows, c], mem[rows, d])
        elif op in (LOAD, STORE):
            idx = mem[rows, c] if op == LOAD else mem[rows, b]
            kind = EV_LOAD if op == LOAD else EV_STORE
            h[rows] = _mix_vec(_mix_vec(_mix_vec(h[rows], np.uint64(kind)), np.uint64(lab)), idx)
            nev[rows] += 1
            bad = idx >= np.uint64(d)
            if bad.any():
                st[rows[bad]] = ST_STUCK
                pc[rows[bad]] = p
                rows, idx = rows[~bad], idx[~bad]
            off = idx.astype(np.int64)
            if op == LOAD:
                mem[rows, a] = mem[rows, b + off]
            else:
                mem[rows, a + off] = mem[rows, c]
        elif op in (BR, LOOP):
            t = (mem[rows, a] != 0).astype(np.uint64)
            kind = EV_BRANCH if op == BR else EV_LOOP
            h[rows] = _mix_vec(_mix_vec(_mix_vec(h[rows], np.uint64(kind)), np.uint64(lab)), t)
            nev[rows] += 1
            pc[rows] = np.where(t == 0, b, nxt)
            continue
        elif op == JMP:
            pc[rows] = b
            continue
        elif op in (ASSERT, ASSUME):
            bad = mem[rows, a] == 0
            if bad.any():
                st[rows[bad]] = ST_STUCK if op == ASSERT else ST_BLOCKED
                pc[rows[bad]] = p
                rows = rows[~bad]
        elif op == HALT:
            st[rows] = ST_COMPLETED
            pc[rows] = p
            continue
        elif op != NOP:  # pragma: no cover
            raise ValueError(f"bad opcode {op}")
        pc[rows] = nxt
    status[:] = st
    pcs[:] = pc
    hashes[:] = h
    nevents[:] = nev
    steps[:] = used


# -- front door -------------------------------------------------------------------

def run_batch(c: Compiled, mem: np.ndarray, fuel: int, use_numba: bool | None = None,
              chunk: int = 4096) -> dict[str, np.ndarray]:
    """Run every row of ``mem`` (modified in place) and collect per-row results."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba kernels requested but numba is disabled or missing")
    n = mem.shape[0]
    out = {
        "status": np.zeros(n, dtype=np.int64),
        "pc": np.zeros(n, dtype=np.int64),
        "hash": np.zeros(n, dtype=np.uint64),
        "events": np.zeros(n, dtype=np.int64),
        "steps": np.zeros(n, dtype=np.int64),
    }
    kernel = run_code_numba if use_numba else run_code_numpy
    step = n if use_numba else chunk
    for lo in range(0, n, max(step, 1)):
        hi = min(n, lo + step)
        kernel(c.code, mem[lo:hi], c.width, fuel, out["status"][lo:hi], out["pc"][lo:hi],
               out["hash"][lo:hi], out["events"][lo:hi], out["steps"][lo:hi])
    return out


# -- straight-line formulas ----------------------------------------------------------

@njit(cache=False)
def first_violation_numba(code, init, slots, rows, width):
    """Index of the first row whose ASSERT fails, or -1.

    ``code`` holds only BIN, UN, ITE and a final ASSERT in topological order.
    Rows are processed in blocks, one instruction at a time across the
    block, and the scan stops after the first block containing a failure.
    """
    mask = np.uint64(0xFFFFFFFFFFFFFFFF) if width == 64 else np.uint64((1 << width) - 1)
    n = rows.shape[0]
    block = 512
    mem = np.empty((init.shape[0], block), dtype=np.uint64)
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        m = hi - lo
        for s in range(init.shape[0]):
            mem[s, :m] = init[s]
        for j in range(slots.shape[0]):
            for r in range(m):
                mem[slots[j], r] = rows[lo + r, j]
        for p in range(code.shape[0]):
            op = code[p, 0]
            a = code[p, 1]
            if op == BIN:
                sub = code[p, 4]
                x = code[p, 2]
                y = code[p, 3]
                for r in range(m):
                    v, _ = _bin(sub, mem[x, r], mem[y, r], mask, width)
                    mem[a, r] = v
            elif op == UN:
                sub = code[p, 4]
                x = code[p, 2]
                for r in range(m):
                    mem[a, r] = _un(sub, mem[x, r], mask)
            elif op == ITE:
                c = code[p, 2]
                x = code[p, 3]
                y = code[p, 4]
                for r in range(m):
                    mem[a, r] = mem[x, r] if mem[c, r] != 0 else mem[y, r]
            elif op == ASSERT:
                for r in range(m):
                    if mem[a, r] == 0:
                        return lo + r
    return -1


def first_violation_numpy(code, init, slots, rows, width):
    mask = np.uint64((1 << width) - 1) if width < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    n = rows.shape[0]
    mem = np.repeat(init[:, None], n, axis=1)
    for j, s in enumerate(slots):
        mem[s] = rows[:, j]
    for op, a, b, c, d, _, _ in code:
        if op == BIN:
            mem[a], _ = _bin_vec(d, mem[b], mem[c], mask, width)
        elif op == UN:
            mem[a] = _un_vec(d, mem[b], mask)
        elif op == ITE:
            mem[a] = np.where(mem[b] != 0, mem[c], mem[d])
        elif op == ASSERT:
            bad = np.flatnonzero(mem[a] == 0)
            if bad.size:
                return int(bad[0])
    return -1


def first_violation(c: Compiled, rows: np.ndarray, use_numba: bool | None = None) -> int:
    """First row of ``rows`` (input values in ``c.inputs`` order) failing the formula."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    slots = np.asarray([s.base for s in c.inputs], dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    kernel = first_violation_numba if use_numba else first_violation_numpy
    return int(kernel(c.code, c.init, slots, rows, c.width))
