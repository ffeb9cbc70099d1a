"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows N] [--repeat R]

Two workloads: the batch interpreter on every input of a corpus program
(what the oracle does), and the first-violation search on one formula
(what the enumerative backend does).
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from ctprover._jit import HAVE_NUMBA
from ctprover.frontend import load_program
from ctprover.product import build_cross_product, build_semi_product
from ctprover.semantics.compile import compile_program, fill_inputs
from ctprover.semantics.kernels import first_violation, run_batch
from ctprover.taint import analyze
from ctprover.verifier import EnumerateBackend, Mode, VCConfig, check, gen_vcs
from ctprover.verifier.backends import compile_formula

CORPUS = os.path.join(os.path.dirname(__file__), "..", "corpus")


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def batch_workload(name: str, rows: int, width: int, seed: int):
    with open(os.path.join(CORPUS, f"{name}.wh"), encoding="utf-8") as fh:
        p = load_program(fh.read())
    c = compile_program(p, width)
    rng = np.random.default_rng(seed)
    n_in = sum(s.length for s in c.inputs)
    values = rng.integers(0, 1 << width, size=(rows, n_in), dtype=np.uint64)
    base = c.memory(rows)
    fill_inputs(c, base, values)

    def go(use_numba: bool):
        return lambda: run_batch(c, base.copy(), 1 << 16, use_numba)
    return go


def formula_workload(rows: int, width: int, seed: int):
    """The largest valid VC of the corpus: a valid formula forces a full scan."""
    best = None
    for f in sorted(os.listdir(CORPUS)):
        if not f.endswith(".wh"):
            continue
        with open(os.path.join(CORPUS, f), encoding="utf-8") as fh:
            p = load_program(fh.read())
        for pp in (build_semi_product(p, analyze(p)), build_cross_product(p, analyze(p))):
            for vc in gen_vcs(pp, width, VCConfig(mode=Mode.BMC, unroll=4)):
                size = len(vc.tm.cone(vc.formula))
                if (best is None or size > best[0]) and check(vc, EnumerateBackend()).valid:
                    best = (size, vc)
    c, syms = compile_formula(best[1].tm, best[1].formula)
    rng = np.random.default_rng(seed)
    rows_ = rng.integers(0, 1 << width, size=(rows, len(syms)), dtype=np.uint64)

    def go(use_numba: bool):
        return lambda: first_violation(c, rows_, use_numba)
    return go, f"first violation, {best[0]}-node formula"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=1 << 16)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--width", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is disabled (CTPROVER_NUMBA=0 or not installed); only numpy is timed")
    cases = [
        ("batch run, square_multiply", batch_workload("square_multiply", a.rows, a.width, a.seed)),
        ("batch run, memcmp_early_exit", batch_workload("memcmp_early_exit", a.rows, a.width, a.seed)),
    ]
    go, label = formula_workload(a.rows, 4, a.seed)
    cases.append((label, go))
    print(f"{'workload':40s} {'rows':>8s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for label, make in cases:
        t_np = best_of(make(False), a.repeat)
        if HAVE_NUMBA:
            make(True)()  # compile outside the timed region
            t_nb = best_of(make(True), a.repeat)
            print(f"{label:40s} {a.rows:8d} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}")
        else:
            print(f"{label:40s} {a.rows:8d} {t_np:10.4f} {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
