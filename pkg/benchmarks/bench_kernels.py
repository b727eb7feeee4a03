#!/usr/bin/env python3
"""Benchmark: compiled cone kernels vs the pure-numpy fallback.

Times the per-iteration kernel primitives on a synthetic cone layout shaped
like the planner's subproblems (many small rotated-cone blocks plus a few
wide ones), then times full solves of a representative reflection-design
program with each backend.

Usage: python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import importlib
import os
import time

import numpy as np


def build_layout(n_small: int = 300, n_wide: int = 4, wide: int = 65, l: int = 60):
    dims = np.array([3] * n_small + [wide] * n_wide, dtype=np.int64)
    starts = (l + np.r_[0, np.cumsum(dims)[:-1]]).astype(np.int64)
    m = l + int(dims.sum())
    return l, starts, dims, m


def rand_interior(rng, l, starts, dims, m):
    u = rng.normal(size=m)
    u[:l] = np.abs(u[:l]) + 0.1
    for st, d in zip(starts, dims):
        u[st] = np.linalg.norm(u[st + 1 : st + d]) + abs(rng.normal()) + 0.1
    return u


def time_kernels(mod, repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(0)
    l, starts, dims, m = build_layout()
    s = rand_interior(rng, l, starts, dims, m)
    z = rand_interior(rng, l, starts, dims, m)
    x = rng.normal(size=m)
    du = rng.normal(size=m)
    scaling = mod.compute_scaling(s, z, l, starts, dims)
    out = {}

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.compute_scaling(s, z, l, starts, dims)
    out["compute_scaling"] = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.apply_w(x, *scaling[:3], l, starts, dims, True)
        mod.apply_w(x, *scaling[:3], l, starts, dims, False)
    out["apply_w (fwd+inv)"] = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.jordan_mul(s, x, l, starts, dims)
        mod.jordan_solve(scaling[3], x, l, starts, dims)
    out["jordan (mul+solve)"] = (time.perf_counter() - t0) / repeats

    t0 = time.perf_counter()
    for _ in range(repeats):
        mod.max_step(s, du, l, starts, dims)
    out["max_step"] = (time.perf_counter() - t0) / repeats
    return out


def build_phase_program():
    from swiptplan.channel import compute_stats
    from swiptplan.optimizer import initialize
    from swiptplan.sca_phase import initial_reflection, linearize_and_build
    from swiptplan.scenario import default_scenario

    sc = default_scenario(num_elements=32)
    phi, plan = initialize(sc)
    stats = compute_stats(sc, plan.interior)
    prog, _ = linearize_and_build(sc, stats, plan, initial_reflection(sc, stats, plan))
    return prog


def time_solve(backend_flag: str, prog, repeats: int = 3) -> float:
    os.environ["SWIPTPLAN_PURE_PYTHON"] = backend_flag
    import swiptplan.conic.kernels as kernels_mod
    import swiptplan.conic.solver as solver_mod

    importlib.reload(kernels_mod)
    importlib.reload(solver_mod)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = solver_mod.solve(prog)
        best = min(best, time.perf_counter() - t0)
        assert sol.status == "optimal", sol.status
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    from swiptplan.conic import _kernels_py

    backends = {"python": _kernels_py}
    try:
        from swiptplan.conic import _kernels

        backends["compiled"] = _kernels
    except ImportError:
        print("compiled kernels not built; showing fallback only")

    results = {name: time_kernels(mod, args.repeats) for name, mod in backends.items()}
    ops = list(next(iter(results.values())).keys())
    print(f"\nkernel timings, mean of {args.repeats} calls "
          f"(layout: 300x dim-3 + 4x dim-65 blocks + 60 orthant rows)")
    header = f"{'operation':22s}" + "".join(f"{name:>14s}" for name in results)
    if len(results) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    for op in ops:
        line = f"{op:22s}"
        for name in results:
            line += f"{results[name][op] * 1e6:12.1f}us"
        if len(results) == 2:
            line += f"{results['python'][op] / results['compiled'][op]:9.1f}x"
        print(line)

    print("\nend-to-end solve of a reflection-design subproblem (M=32):")
    prog = build_phase_program()
    t_py = time_solve("1", prog)
    print(f"  python backend:   {t_py:.3f} s")
    if "compiled" in backends:
        t_c = time_solve("0", prog)
        print(f"  compiled backend: {t_c:.3f} s  ({t_py / t_c:.2f}x)")
    os.environ.pop("SWIPTPLAN_PURE_PYTHON", None)


if __name__ == "__main__":
    main()
