"""One-step orchestration for the three scheme modes.

base      long-range covector transport, warm-started path-integral solve
boundary  fusion of the long map with one-step advection near free surfaces,
          standard-BC pressure solve (plus a deliberately naive long-map
          variant behind a config flag, for the robustness ablation)
baseline  one-step scalar advection and projection (the reference scheme)
"""

import time as _time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from . import config as cfg_mod
from . import diagnostics as diag
from . import flowmap
from . import geometry as geo
from . import operators as ops_mod
from . import poisson
from . import scenes as scenes_mod
from .backend import configure_threads


class SchemeMode(str, Enum):
    BASE = "base"
    BOUNDARY = "boundary"
    BASELINE = "baseline"


@dataclass
class StepStats:
    kinetic_energy: float
    max_abs_divergence: float
    total_circulation: float
    cg_iterations: int
    cg_residual: float
    velocity_scale: float     # max of pre-projection and projected speeds
    wall_ms: float = 0.0


@dataclass
class SimState:
    cfg: object
    box: np.ndarray
    gravity: np.ndarray
    x_f: np.ndarray
    u_f: np.ndarray
    x_s: np.ndarray
    x_a: np.ndarray
    fm: flowmap.FlowMapState
    has_surface: bool
    time: float = 0.0
    step_index: int = 0
    diagram: object = None
    fops: object = None
    last_stats: StepStats = None

    @property
    def nf(self):
        return self.x_f.shape[0]


def init_state(cfg):
    configure_threads(cfg.threads)
    data = scenes_mod.build_scene(cfg)
    state = SimState(
        cfg=cfg, box=data.box, gravity=data.gravity,
        x_f=np.array(data.x_f), u_f=np.array(data.u_f),
        x_s=np.array(data.x_s), x_a=np.empty((0, 2)),
        fm=flowmap.make_state(data.x_f, data.u_f),
        has_surface=data.x_s.shape[0] > 0,
    )
    if state.has_surface:
        resample_air(state)
    rebuild_geometry(state)
    return state


def all_points(state):
    pts = np.vstack([state.x_f, state.x_s, state.x_a])
    kinds = np.concatenate([
        np.full(state.x_f.shape[0], geo.FLUID, dtype=np.int8),
        np.full(state.x_s.shape[0], geo.SOLID, dtype=np.int8),
        np.full(state.x_a.shape[0], geo.AIR, dtype=np.int8),
    ])
    return pts, kinds


def rebuild_geometry(state):
    pts, kinds = all_points(state)
    state.diagram = geo.build_diagram(pts, kinds, state.box,
                                      spacing=state.cfg.spacing)
    # fluid particles come first, so fluid-local index == particle index
    state.x_f = state.diagram.points[:state.nf]
    state.fops = ops_mod.build_fluid_operators(state.diagram)
    return state


def _clamp(state, x):
    h = state.cfg.spacing
    eps = 1e-3 * h
    np.clip(x[:, 0], state.box[0] + eps, state.box[2] - eps, out=x[:, 0])
    np.clip(x[:, 1], state.box[1] + eps, state.box[3] - eps, out=x[:, 1])
    return x


def compute_dt(state, cfl, dt_max):
    vmax = max(float(np.max(np.hypot(state.u_f[:, 0], state.u_f[:, 1]))),
               1e-12)
    return min(dt_max, cfl * state.cfg.spacing / vmax)


def _max_iter(cfg, nf):
    return cfg.cg_max_iter if cfg.cg_max_iter > 0 else max(50, 10 * nf)


def _update_jacobians(state, dt):
    """Refit T; returns the rank-deficient mask for the caller's policy."""
    fm = state.fm
    if state.cfg.jacobian_mode == "ode":
        grad = np.empty((state.nf, 2, 2))
        bad = np.zeros(state.nf, dtype=bool)
        import voroflow._flow_kernels as fk
        fk.fit_velocity_gradients(state.fops.nbr_off, state.fops.nbr_idx,
                                  state.x_f, state.u_f, grad, bad)
        flowmap.evolve_jacobians(fm, grad, dt)
        return bad
    return flowmap.update_jacobians(fm, state.x_f,
                                    state.fops.nbr_off, state.fops.nbr_idx)


def _solve(state, u_star, initial_guess=None):
    problem = poisson.build_problem(state.fops, u_star,
                                    initial_guess=initial_guess)
    # pointwise contract: max |div u| <= 1e-6 max speed / spacing, with a
    # 2x safety margin; |u*| underestimates the final velocity scale
    div_tol = 0.5e-6 * max(float(np.max(np.abs(u_star))), 1e-12) \
        / state.cfg.spacing
    sol = poisson.cg_solve(problem, tol=state.cfg.cg_tol,
                           max_iter=_max_iter(state.cfg, state.nf),
                           div_tol=div_tol)
    return sol, poisson.project_velocity(state.fops, u_star, sol.p)


def _finish(state, dt, sol, u_star):
    cfg = state.cfg
    fm = state.fm
    fm.since_reinit += 1
    fops = state.fops
    scale = max(float(np.max(np.abs(u_star))), float(np.max(np.abs(state.u_f))))
    stats = StepStats(
        kinetic_energy=diag.kinetic_energy(fops.Vf, state.u_f),
        max_abs_divergence=diag.max_abs_divergence(fops, state.u_f),
        total_circulation=diag.total_circulation(fops, state.u_f),
        cg_iterations=sol.iterations,
        cg_residual=sol.residual,
        velocity_scale=scale,
    )
    if cfg.lloyd_strength > 0.0:
        lloyd_regularize(state, state.diagram)
    if fm.since_reinit >= cfg.reinit_period or np.any(fm.force_reinit):
        flowmap.reinitialize(fm, state.x_f, state.u_f)
    if state.has_surface:
        resample_air(state)
    state.time += dt
    state.step_index += 1
    state.last_stats = stats
    return stats


def step_base(state, dt):
    fm = state.fm
    state.x_f = _clamp(state, flowmap.advect_positions(state.x_f, state.u_f, dt))
    rebuild_geometry(state)
    fm.force_reinit |= _update_jacobians(state, dt)
    fm.gravity_acc += state.gravity * dt
    u_M = flowmap.map_velocity(fm)
    sol, state.u_f = _solve(state, u_M, initial_guess=fm.lambda_acc)
    fm.lambda_acc[:] = sol.p
    return _finish(state, dt, sol, u_M)


def step_boundary(state, dt):
    cfg = state.cfg
    fm = state.fm
    g_dt = state.gravity * dt
    u_prev = state.u_f.copy()
    state.x_f = _clamp(state, flowmap.advect_positions(state.x_f, u_prev, dt))
    rebuild_geometry(state)

    if cfg.naive_boundary:
        # ablation variant: long-range solve with the path-integral boundary
        # value forced to zero at the surface, no fusion, no one-step branch,
        # no degradation policy for broken neighborhoods
        _update_jacobians(state, dt)
        fm.gravity_acc += g_dt
        u_M = flowmap.map_velocity(fm)
        sol, state.u_f = _solve(state, u_M, initial_guess=fm.lambda_acc)
        fm.lambda_acc[:] = sol.p
        return _finish(state, dt, sol, u_M)

    flowmap.flag_near_surface(fm, state.diagram, state.fops,
                              cfg.k_layers, sticky=cfg.sticky_flags)
    # degraded fits fall back to the one-step branch instead of a global
    # reinit; their previous T is kept but never trusted
    fm.near_surface |= _update_jacobians(state, dt)
    fm.gravity_acc += g_dt
    if fm.since_reinit == 0:
        # map spans exactly this step: one-step advection is exact
        u_star = u_prev + g_dt
    else:
        u_M = flowmap.map_velocity(fm)
        grad_L = ops_mod.pointwise_gradient(state.fops, fm.lambda_acc)
        grad_K = ops_mod.pointwise_gradient(
            state.fops, 0.5 * np.sum(u_prev * u_prev, axis=1))
        u_A = flowmap.fuse_to_advected(u_M, grad_L, grad_K, dt)
        u_star = np.where(fm.near_surface[:, None], u_prev + g_dt, u_A)

    sol, state.u_f = _solve(state, u_star)
    # sol.p is p dt under "pressure" scaling and the one-step path-integral
    # increment under "lambda" scaling; the accumulation is identical
    flowmap.accumulate_lambda(fm, sol.p / dt, state.u_f, dt)
    return _finish(state, dt, sol, u_star)


def step_baseline(state, dt):
    g_dt = state.gravity * dt
    state.x_f = _clamp(state, flowmap.advect_positions(state.x_f, state.u_f, dt))
    rebuild_geometry(state)
    u_star = state.u_f + g_dt
    sol, state.u_f = _solve(state, u_star)
    flowmap.reinitialize(state.fm, state.x_f, state.u_f)
    return _finish(state, dt, sol, u_star)


def step(state, dt):
    mode = SchemeMode(state.cfg.mode)
    t0 = _time.perf_counter()
    if mode == SchemeMode.BASE:
        stats = step_base(state, dt)
    elif mode == SchemeMode.BOUNDARY:
        stats = step_boundary(state, dt)
    else:
        stats = step_baseline(state, dt)
    if state.cfg.timing:
        stats.wall_ms = (_time.perf_counter() - t0) * 1e3
    return stats


def step_base_instrumented(state, dt):
    """Base step that also runs the zero-start short-range solve.

    The warm-started long solve advances the state; the short solve (rhs
    from the already-projected velocity, zero initial guess) is run on the
    same diagram for the warm-start proposition check. Returns
    (stats, agree, warm_iters, zero_iters).
    """
    cfg = state.cfg
    fm = state.fm
    state.x_f = _clamp(state, flowmap.advect_positions(state.x_f, state.u_f, dt))
    rebuild_geometry(state)
    _update_jacobians(state, dt)
    fm.gravity_acc += state.gravity * dt
    u_M = flowmap.map_velocity(fm)

    sol_warm, u_warm = _solve(state, u_M, initial_guess=fm.lambda_acc)
    u_short = poisson.project_velocity(state.fops, u_M, fm.lambda_acc)
    sol_zero, u_zero = _solve(state, u_short)

    scale = max(float(np.max(np.abs(u_warm))), float(np.max(np.abs(u_zero))),
                1e-30)
    agree = float(np.max(np.abs(u_warm - u_zero))) <= 10.0 * cfg.cg_tol * scale

    state.u_f = u_warm
    fm.lambda_acc[:] = sol_warm.p
    stats = _finish(state, dt, sol_warm, u_M)
    return stats, agree, sol_warm.iterations, sol_zero.iterations


def lloyd_regularize(state, diagram):
    """Pull fluid particles toward their cell centroids; the flow-map
    anchor x_init is left untouched.

    Near-surface particles are skipped: their cells extend into the
    arbitrarily sampled air band, so the centroid pull would rattle the
    free surface and feed a spurious pressure response.
    """
    nf = state.nf
    target = diagram.centroids[:nf]
    s = state.cfg.lloyd_strength
    shift = s * (target - state.x_f)
    shift[state.fm.near_surface] = 0.0
    state.x_f = _clamp(state, state.x_f + shift)
    return state


def resample_air(state, band_width=None):
    """Regenerate the air band on the initialization lattice.

    Candidate sites lie within band_width of a fluid particle but no closer
    than 0.8 spacing to any fluid or solid particle.
    """
    h = state.cfg.spacing
    if band_width is None:
        band_width = state.cfg.band_width_factor * h
    pts, _, _, _ = scenes_mod.lattice(state.box, h)
    d_f = cKDTree(state.x_f).query(pts)[0]
    keep = (d_f <= band_width) & (d_f > 0.8 * h)
    if state.x_s.shape[0]:
        d_s = cKDTree(state.x_s).query(pts)[0]
        keep &= d_s > 0.8 * h
    state.x_a = pts[keep]
    return state
