"""Compiled vs NumPy kernels on realistic sizes.

    python3 benchmarks/bench_kernels.py [--k 775] [--repeat 3] [--json out.json]

Schur and svec-Kronecker timings use the cones of the benchmark LMI at the
given ``k`` (one full Schur-matrix assembly per repeat); RK4 integrates a
random stable two-state, four-vertex loop for 20 000 steps.
"""

import argparse
import json
import time

import numpy as np

from adaptive_gainsched import kernels
from adaptive_gainsched.assembly import build_synthesis_program, compile_standard_form
from adaptive_gainsched.ipm import _Block
from adaptive_gainsched.model import example_system


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def schur_case(k, seed):
    prob = compile_standard_form(build_synthesis_program(example_system(k)))
    blocks = [_Block(c.dim, c.g0, c.G) for c in prob.cones]
    rng = np.random.default_rng(seed)
    tis = []
    for b in blocks:
        R = rng.standard_normal((b.dim, b.dim))
        tis.append(R @ R.T / b.dim + np.eye(b.dim))
    return blocks, tis, prob.nvar + 1


def run_schur(impl, blocks, tis, n):
    schur = kernels.get("schur_accumulate", impl)
    kron = kernels.get("svec_kron", impl)
    M = np.zeros((n, n))
    for b, Ti in zip(blocks, tis):
        K = kron(Ti, b.i, b.j, b.w)
        Y = np.ascontiguousarray(b.GT @ K)
        schur(M, b.G.indptr, b.G.indices, b.G.data, Y)
    return M


def run_kron(impl, blocks, tis):
    kron = kernels.get("svec_kron", impl)
    return [kron(Ti, b.i, b.j, b.w) for b, Ti in zip(blocks, tis)]


def rk4_case(seed):
    rng = np.random.default_rng(seed)
    A = -np.eye(2) + 0.1 * rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 1))
    K = 0.1 * rng.standard_normal((4, 1, 2))
    Mk = rng.standard_normal((4, 4, 2, 2))
    Mk = 0.5 * (Mk + Mk.transpose(0, 1, 3, 2))
    return (A, B), np.array([1.0, -1.0]), np.full(4, 0.25), np.full(4, 0.25), K, Mk


def run_rk4(impl, case, steps):
    AB, x0, h0, a, K, Mk = case
    return kernels.get("rk4_integrate", impl)(AB, x0, h0, a, K, Mk, 0.5, 1e-4, steps, False)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, default=775.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)

    try:
        kernels.get("schur_accumulate", "compiled")
    except ImportError:
        raise SystemExit("compiled kernels not built; run `python3 setup.py build_ext --inplace`")

    blocks, tis, n = schur_case(args.k, args.seed)
    rk = rk4_case(args.seed)
    rows = []
    cases = {
        "svec_kron": (lambda impl: run_kron(impl, blocks, tis),
                      lambda a, b: max(np.abs(x - y).max() for x, y in zip(a, b))),
        "schur_accumulate": (lambda impl: run_schur(impl, blocks, tis, n),
                             lambda a, b: np.abs(a - b).max() / max(1.0, np.abs(a).max())),
        "rk4_integrate": (lambda impl: run_rk4(impl, rk, args.steps),
                          lambda a, b: np.abs(a[0] - b[0]).max()),
    }
    print(f"schur size n={n}, cones={len(blocks)}; rk4 steps={args.steps}")
    print(f"{'kernel':<18}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max diff':>12}")
    for name, (fn, diff) in cases.items():
        tp, outp = best_of(lambda: fn("python"), args.repeat)
        tc, outc = best_of(lambda: fn("compiled"), args.repeat)
        d = float(diff(outp, outc))
        rows.append({"kernel": name, "python_s": tp, "compiled_s": tc, "speedup": tp / tc,
                     "max_diff": d})
        print(f"{name:<18}{tp:>12.4f}{tc:>14.4f}{tp / tc:>10.1f}{d:>12.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"k": args.k, "n": n, "rows": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
