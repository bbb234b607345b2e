"""Compiled against pure-Python kernels on the operations the search and checks spend time in.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--n 2000]

Prints one row per (operation, profile) with the best wall time of each
backend and the speed-up. Both backends get identical inputs; the script
also asserts that their outputs agree.
"""

import argparse
import time

import numpy as np

from heisbcp.kernels import backends
from heisbcp.profile import zoo_profile

PROFILES = ("koranyi", "phi1", "rho_inf")
TOL, MAX_ITER = 1e-12, 200


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(mod, p, k, P, Q):
    prog = p.program
    s = np.sqrt((P[:, :2] ** 2).sum(axis=1))[:, None] if p.kind == "radial" else P[:, :2]
    return {
        "eval_program": lambda: np.asarray(mod.eval_program(prog.ops, prog.args, s)),
        "contains": lambda: np.array([k.contains(x, y, z, TOL) for x, y, z in P]),
        "pair_distances": lambda: np.asarray(k.pair_distances(P, Q, TOL, MAX_ITER)),
        "within_mask": lambda: np.asarray(k.within_mask(P[0], Q, np.full(len(Q), 0.8), TOL)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="points per operation")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    mods = backends()
    if len(mods) < 2:
        raise SystemExit("compiled kernel not built; run: pip install --no-build-isolation -e .")
    c_mod, py_mod = mods
    rng = np.random.default_rng(0)
    P = rng.uniform(-1.5, 1.5, (args.n, 3))
    Q = rng.uniform(-1.5, 1.5, (args.n, 3))

    print(f"{'operation':<16}{'profile':<10}{'compiled s':>12}{'python s':>12}{'speed-up':>10}")
    for name in PROFILES:
        p = zoo_profile(name)
        kc, kp = p.kernel_with(c_mod), p.kernel_with(py_mod)
        slow = cases(py_mod, p, kp, P, Q)
        for op, fc in cases(c_mod, p, kc, P, Q).items():
            tc, oc = best_of(fc, args.repeat)
            tp, op_out = best_of(slow[op], args.repeat)
            assert np.allclose(oc, op_out, rtol=1e-10, atol=1e-12, equal_nan=True), (op, name)
            print(f"{op:<16}{name:<10}{tc:>12.4f}{tp:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
