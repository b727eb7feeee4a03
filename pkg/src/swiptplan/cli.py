"""Command-line interface: optimize, sweep-elements, validate.

All outputs are plain CSV/JSONL/text, byte-deterministic given the same
scenario file, flags, and seed.  ``PLANNER_THREADS`` caps the sweep's
process parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import montecarlo as mc
from .channel import compute_stats, ris_output_power, ris_reflected_noise_power
from .optimizer import InitializationError, RunResult, run_algorithm1
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_SCENARIO = 2
EXIT_INSUFFICIENT = 3


def _load(path: str) -> Scenario:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"scenario not found: {path}")
    return load_scenario(p.read_text())


def _apply_flags(sc: Scenario, args: argparse.Namespace) -> Scenario:
    overrides = {}
    if getattr(args, "mode", None):
        overrides["ris_mode"] = args.mode
    if getattr(args, "elements", None):
        overrides["num_elements"] = args.elements
    return replace(sc, **overrides) if overrides else sc


def _write_outputs(sc: Scenario, result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["l,x_m,y_m,t_s"]
    verts = result.flight.hover_positions
    times = (0.0, *result.flight.hover_times, 0.0)
    for l, (q, t) in enumerate(zip(verts, times)):
        lines.append(f"{l},{q.real:.6f},{q.imag:.6f},{t:.6f}")
    (out_dir / "trajectory.csv").write_text("\n".join(lines) + "\n")

    lines = ["l,m,amplitude,phase_rad"]
    for l, vec in enumerate(result.reflection.phi, start=1):
        for m, coeff in enumerate(vec, start=1):
            lines.append(f"{l},{m},{abs(coeff):.9e},{np.angle(coeff):.9f}")
    (out_dir / "phi.csv").write_text("\n".join(lines) + "\n")

    def _json_default(obj):
        if hasattr(obj, "item"):
            return obj.item()
        return str(obj)

    with (out_dir / "trace.jsonl").open("w") as fh:
        for row in result.trace:
            fh.write(json.dumps(row, sort_keys=True, default=_json_default) + "\n")

    e = result.energy
    outer_rounds = sum(1 for row in result.trace if row.get("stage") == "outer")
    summary = [
        f"mode: {sc.ris_mode}",
        f"elements: {sc.num_elements}",
        f"total_energy_j: {e.total:.6f}",
        f"flight_energy_j: {e.flight_energy:.6f}",
        f"hover_energy_j: {e.hover_energy:.6f}",
        f"radiated_energy_j: {e.radiated_energy:.6f}",
        f"ris_energy_j: {e.ris_energy:.6f}",
        f"outer_rounds: {outer_rounds}",
        f"termination: {result.termination}",
    ]
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")


def cmd_optimize(args: argparse.Namespace) -> int:
    try:
        sc = _apply_flags(_load(args.scenario), args)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except ScenarioError as exc:
        print(f"bad scenario: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    try:
        result = run_algorithm1(sc, seed=args.seed)
    except InitializationError as exc:
        print(f"initialization failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _write_outputs(sc, result, Path(args.out))
    print(f"total energy: {result.total_energy:.3f} J ({sc.ris_mode}, M={sc.num_elements})")
    return EXIT_OK


def _sweep_cell(payload: tuple[str, int, str, str, int | None]) -> tuple[int, str, float, str]:
    config_text, elements, mode, out_dir, seed = payload
    sc = replace(load_scenario(config_text), num_elements=elements, ris_mode=mode)
    cell_dir = Path(out_dir) / f"cell_M{elements}_{mode}"
    try:
        result = run_algorithm1(sc, seed=seed)
    except Exception as exc:  # per-cell failures recorded, sweep continues
        return elements, mode, float("nan"), f"{type(exc).__name__}: {exc}"
    _write_outputs(sc, result, cell_dir)
    return elements, mode, result.total_energy, "ok"


def cmd_sweep_elements(args: argparse.Namespace) -> int:
    try:
        config_text = Path(args.scenario).read_text()
        load_scenario(config_text)  # validate before launching workers
    except FileNotFoundError:
        print(f"scenario not found: {args.scenario}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except ScenarioError as exc:
        print(f"bad scenario: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    try:
        elements = [int(tok) for tok in args.elements.split(",") if tok.strip()]
    except ValueError:
        print("--elements expects a comma-separated integer list", file=sys.stderr)
        return EXIT_ERROR
    if not elements:
        print("--elements list is empty", file=sys.stderr)
        return EXIT_ERROR

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [
        (config_text, m, mode, str(out_dir), args.seed)
        for m in elements
        for mode in ("active", "passive")
    ]
    env_cap = os.environ.get("PLANNER_THREADS")
    workers = min(len(cells), os.cpu_count() or 1)
    if env_cap:
        workers = max(1, min(workers, int(env_cap)))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(cell) for cell in cells]

    results.sort(key=lambda row: (row[0], row[1]))
    lines = ["M,mode,total_energy_J"]
    failures = []
    for m, mode, total, status in results:
        lines.append(f"{m},{mode},{total:.6f}")
        if status != "ok":
            failures.append(f"M={m} {mode}: {status}")
    (out_dir / "fig2_data.csv").write_text("\n".join(lines) + "\n")
    for message in failures:
        print(f"cell failed: {message}", file=sys.stderr)
    print(f"wrote {out_dir / 'fig2_data.csv'} ({len(results)} cells, {len(failures)} failures)")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        sc = _load(args.scenario)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except ScenarioError as exc:
        print(f"bad scenario: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    if args.n_samples < 1000:
        print("insufficient samples: need at least 1000", file=sys.stderr)
        return EXIT_INSUFFICIENT

    rng = np.random.default_rng(args.seed)
    hover = sc.uav_start + 0.35 * (sc.uav_end - sc.uav_start)
    stats = compute_stats(sc, [hover])
    rows = []
    worst = 0.0
    for trial in range(args.instances):
        k = int(rng.integers(sc.num_users))
        amp = 10.0 ** rng.uniform(-1.0, 2.0)
        phi = amp * (
            rng.standard_normal(sc.num_elements) + 1j * rng.standard_normal(sc.num_elements)
        ) / np.sqrt(2.0)
        seed = int(rng.integers(2**31))
        closed = stats.second_moment(k, 0, phi)
        est = mc.mc_second_moment(sc, hover, k, phi, args.n_samples, seed)
        rows.append((f"mean_power[{trial}]", closed, est))
        closed = ris_reflected_noise_power(sc, k, hover, phi)
        est = mc.mc_ris_reflected_noise(sc, hover, k, phi, args.n_samples, seed)
        rows.append((f"reflected_noise[{trial}]", closed, est))
        closed = ris_output_power(sc, hover, phi)
        est = mc.mc_ris_output_power(sc, hover, phi, args.n_samples, seed)
        rows.append((f"surface_output[{trial}]", closed, est))

    print(f"{'quantity':24s} {'closed_form':>14s} {'mc_mean':>14s} {'mc_se':>10s} {'z':>7s}")
    for name, closed, est in rows:
        z = est.z_score(closed)
        worst = max(worst, abs(z))
        print(f"{name:24s} {closed:14.6e} {est.mean:14.6e} {est.std_error:10.2e} {z:7.2f}")
    print(f"worst |z| = {worst:.2f} over {len(rows)} checks (threshold 3.0)")
    return EXIT_OK if worst <= 3.0 else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swiptplan",
        description=(
            "Plan hover positions, hover times, and reflection coefficients that "
            "minimize mission energy for an aerial power-and-data transmitter."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the alternating optimization once")
    p_opt.add_argument("--scenario", required=True, help="scenario YAML file")
    p_opt.add_argument("--out", required=True, help="output directory")
    p_opt.add_argument("--mode", choices=["active", "passive"], help="override surface mode")
    p_opt.add_argument("--elements", type=int, help="override element count")
    p_opt.add_argument("--seed", type=int, default=None, help="initialization seed")
    p_opt.set_defaults(func=cmd_optimize)

    p_sweep = sub.add_parser("sweep-elements", help="energy vs element count, both modes")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--elements", required=True, help="comma-separated list, e.g. 16,32,64")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.set_defaults(func=cmd_sweep_elements)

    p_val = sub.add_parser("validate", help="closed forms vs Monte Carlo sampling")
    p_val.add_argument("--scenario", required=True)
    p_val.add_argument("--n-samples", type=int, default=100000)
    p_val.add_argument("--seed", type=int, default=2024)
    p_val.add_argument("--instances", type=int, default=5)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface module errors as a nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
