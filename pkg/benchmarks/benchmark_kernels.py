"""Compare the numba kernels against the pure-numpy fallback.

Runs the same workloads in two subprocesses (VOROFLOW_NUMBA=1 and =0) and
prints a timing table. The backend is chosen at import time, so each path
needs its own interpreter.

Usage: python3 benchmarks/benchmark_kernels.py [--points N] [--steps K]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def worker(n_points, n_steps):
    import numpy as np

    from voroflow import backend, config, geometry, operators, stepper

    rng = np.random.default_rng(0)
    box = np.array([0.0, 0.0, 1.0, 1.0])
    pts = 0.01 + 0.98 * rng.random((n_points, 2))
    kinds = np.zeros(n_points, dtype=np.int8)

    # warm up JIT compilation outside the timed region
    geometry.build_diagram(pts[:64], kinds[:64], box)

    t0 = time.perf_counter()
    for _ in range(n_steps):
        dia = geometry.build_diagram(pts, kinds, box)
    t_geom = (time.perf_counter() - t0) / n_steps

    fops = operators.build_fluid_operators(dia)
    from voroflow import flowmap
    fm = flowmap.make_state(pts, np.zeros_like(pts))
    x_now = pts + 1e-3 * rng.standard_normal(pts.shape)
    flowmap.update_jacobians(fm, x_now, fops.nbr_off, fops.nbr_idx)
    t0 = time.perf_counter()
    for _ in range(n_steps):
        flowmap.update_jacobians(fm, x_now, fops.nbr_off, fops.nbr_idx)
    t_jac = (time.perf_counter() - t0) / n_steps

    h = 1.0 / int(np.sqrt(n_points))
    cfg = config.default_config("taylor_green", spacing=2 * h, steps=3,
                                timing=False)
    state = stepper.init_state(cfg)
    t0 = time.perf_counter()
    for _ in range(3):
        stepper.step(state, cfg.dt)
    t_step = (time.perf_counter() - t0) / 3

    print(json.dumps({"numba": backend.USE_NUMBA, "diagram_s": t_geom,
                      "jacobians_s": t_jac, "full_step_s": t_step}))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=5)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        worker(args.points, args.steps)
        return

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, VOROFLOW_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, __file__, "--worker",
             "--points", str(args.points), "--steps", str(args.steps)],
            env=env, capture_output=True, text=True, check=True)
        results[flag] = json.loads(out.stdout.strip().split("\n")[-1])

    print(f"{args.points} points, mean over {args.steps} repetitions\n")
    print(f"{'kernel':<14}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key, label in (("diagram_s", "diagram"), ("jacobians_s", "jacobians"),
                       ("full_step_s", "full step")):
        tn = results["1"][key]
        tp = results["0"][key]
        print(f"{label:<14}{tn * 1e3:>10.1f}ms{tp * 1e3:>10.1f}ms"
              f"{tp / tn:>9.1f}x")


if __name__ == "__main__":
    main()
