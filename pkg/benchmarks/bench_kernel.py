"""Compare the compiled evaluation kernel against its pure-Python source.

    python benchmarks/bench_kernel.py [--n-sim 1024] [--repeats 5]

Both paths run the same witness programs on the same seeds; the script checks
that their outputs agree before timing them.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from lotinduce._jit import backend
from lotinduce.expr import DEFAULT_BUDGET, DEFAULT_MAX_LEN, parse_program
from lotinduce.kernels import CompiledProgram, run_compiled, sim_seeds

PROGRAMS = {
    "An": "(pair a (if (flip 0.5) ∅ (F1 ∅)))",
    "AnBn": "(if (flip 0.5) x (pair a (F1 (pair b x)))) ; (pair a (F1 b))",
    "Dyck": "(if (flip 0.9) ∅ (pair a (pair (F1 ∅) (pair b (F1 ∅))))) ; "
            "(pair a (pair (F1 ∅) (pair b (F1 ∅))))",
    "AnBnCn": "(if (flip 0.5) x (pair (pair a (F1 (pair b x))) c)) ; (pair a (pair (F1 b) c))",
}


def best_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-sim", type=int, default=1024)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    if backend() != "numba":
        raise SystemExit("numba backend unavailable (LOTINDUCE_PURE_PYTHON set?); nothing to compare")

    seeds = sim_seeds(12345, args.n_sim)
    print(f"{'program':<8} {'numba ms':>10} {'python ms':>10} {'speedup':>8}")
    for name, text in PROGRAMS.items():
        cp = CompiledProgram(parse_program(text))
        fast = lambda: run_compiled(cp, seeds, DEFAULT_BUDGET, DEFAULT_MAX_LEN)
        slow = lambda: run_compiled(cp, seeds, DEFAULT_BUDGET, DEFAULT_MAX_LEN, python=True)
        a, b = fast(), slow()  # also triggers compilation
        if not all(np.array_equal(x, y) for x, y in zip(a, b)):
            raise SystemExit(f"{name}: compiled and pure-Python outputs differ")
        t_fast = best_time(fast, args.repeats)
        t_slow = best_time(slow, max(1, args.repeats // 2))
        print(f"{name:<8} {t_fast * 1e3:10.2f} {t_slow * 1e3:10.1f} {t_slow / t_fast:7.0f}x")


if __name__ == "__main__":
    main()
