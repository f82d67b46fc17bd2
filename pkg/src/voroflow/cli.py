"""Command-line driver: config in, CSV time series and snapshots out.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 I/O error.
"""

import argparse
import os
import sys

import numpy as np

from . import config as cfg_mod
from . import diagnostics as diag
from . import geometry as geo
from . import poisson
from . import stepper

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _parse_args(argv):
    ap = argparse.ArgumentParser(
        prog="simulate",
        description="Particle-based incompressible flow simulator",
    )
    ap.add_argument("--config", required=True, help="key = value config file")
    ap.add_argument("--scene", choices=cfg_mod.SCENES)
    ap.add_argument("--mode", choices=cfg_mod.MODES)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--dump-voronoi", action="store_true",
                    help="write the cell polygons of each snapshot frame")
    return ap.parse_args(argv)


def _write_frame(state, outdir, dump_voronoi):
    pts, kinds = stepper.all_points(state)
    uv = np.zeros_like(pts)
    uv[:state.nf] = state.u_f
    omega = diag.compute_vorticity(state.fops, state.u_f)
    ids = np.arange(pts.shape[0])
    path = os.path.join(outdir, f"frame_{state.step_index:06d}.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(diag.FRAME_HEADER + "\n")
        for line in diag.frame_rows(ids, kinds, pts, uv, omega):
            fh.write(line + "\n")
    if dump_voronoi:
        vpath = os.path.join(outdir, f"voronoi_{state.step_index:06d}.txt")
        with open(vpath, "w", encoding="utf-8") as fh:
            fh.write(geo.dump_polygons(state.diagram))


def run(cfg, dump_voronoi=False):
    """Execute the configured run; returns a process exit code."""
    outdir = cfg.out
    try:
        os.makedirs(outdir, exist_ok=True)
        state = stepper.init_state(cfg)
        with open(os.path.join(outdir, "config_resolved.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(cfg_mod.format_resolved(cfg))
        energy_path = os.path.join(outdir, "energy.csv")
        efh = open(energy_path, "w", encoding="utf-8")
    except OSError as exc:
        print(f"simulate: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    status = EXIT_OK
    try:
        efh.write(diag.ENERGY_HEADER + "\n")
        _write_frame(state, outdir, dump_voronoi)
        for _ in range(cfg.steps):
            dt = (stepper.compute_dt(state, cfg.cfl, cfg.dt_max)
                  if cfg.adaptive_dt else cfg.dt)
            try:
                stats = stepper.step(state, dt)
            except poisson.SolverFailure as exc:
                print(f"simulate: solver failure at step "
                      f"{state.step_index + 1}: {exc}", file=sys.stderr)
                _write_frame(state, outdir, dump_voronoi)
                status = EXIT_SOLVER
                break
            efh.write(diag.energy_row(
                state.step_index, state.time, stats.kinetic_energy,
                stats.max_abs_divergence, stats.total_circulation,
                stats.cg_iterations, stats.cg_residual, stats.wall_ms) + "\n")
            is_last = state.step_index == cfg.steps
            if is_last or (cfg.frame_every > 0
                           and state.step_index % cfg.frame_every == 0):
                _write_frame(state, outdir, dump_voronoi)
    except OSError as exc:
        print(f"simulate: I/O error: {exc}", file=sys.stderr)
        status = EXIT_IO
    finally:
        efh.close()
    return status


def main(argv=None):
    args = _parse_args(argv)
    try:
        cfg = cfg_mod.parse_config(args.config, overrides={
            "scene": args.scene, "mode": args.mode,
            "steps": args.steps, "out": args.out,
        })
    except cfg_mod.ConfigError as exc:
        print(f"simulate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"simulate: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, dump_voronoi=args.dump_voronoi)


if __name__ == "__main__":
    sys.exit(main())
