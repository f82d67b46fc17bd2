"""Deterministic particle initializers for the benchmark scenes."""

from dataclasses import dataclass, field

import numpy as np

from . import config as cfg_mod


@dataclass
class SceneData:
    x_f: np.ndarray                      # (nf, 2) fluid positions
    u_f: np.ndarray                      # (nf, 2) fluid velocities
    x_s: np.ndarray                      # (ns, 2) static solid positions
    box: np.ndarray                      # (4,) domain
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(2))


def lattice(box, h):
    """Cell-centered uniform lattice covering the box."""
    nx = max(1, int(round((box[2] - box[0]) / h)))
    ny = max(1, int(round((box[3] - box[1]) / h)))
    xs = box[0] + (np.arange(nx) + 0.5) * h
    ys = box[1] + (np.arange(ny) + 0.5) * h
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    idx = np.column_stack([np.repeat(np.arange(nx), ny),
                           np.tile(np.arange(ny), nx)])
    return pts, idx, nx, ny


def _walled_lattice(cfg, box):
    """Split the lattice into wall sites (bottom, left, right) and the rest."""
    h = cfg.spacing
    pts, idx, nx, ny = lattice(box, h)
    wl = cfg.wall_layers
    solid = (idx[:, 0] < wl) | (idx[:, 0] >= nx - wl) | (idx[:, 1] < wl)
    return pts, idx, solid


def init_taylor_green(cfg):
    """Divergence-free symmetric vortex lattice in a closed box, no air."""
    box = cfg_mod.resolve_box(cfg)
    L = box[2] - box[0]
    pts, _, _, _ = lattice(box, cfg.spacing)
    kx = np.pi / L
    x = pts[:, 0] - box[0]
    y = pts[:, 1] - box[1]
    u = np.column_stack([
        np.sin(kx * x) * np.cos(kx * y),
        -np.cos(kx * x) * np.sin(kx * y),
    ]) * cfg.u0
    return SceneData(x_f=pts, u_f=u, x_s=np.empty((0, 2)), box=box)


def taylor_vortex_velocity(pts, center, U, a):
    """Closed-form velocity of one Taylor vortex.

    The tangential speed u_theta(r) = U (r/a) exp((1 - r^2/a^2)/2) inverts
    the vorticity profile omega(r) = U/a (2 - r^2/a^2) exp((1 - r^2/a^2)/2)
    through omega = (1/r) d(r u_theta)/dr.
    """
    d = pts - center
    r2 = np.sum(d * d, axis=1)
    amp = (U / a) * np.exp((1.0 - r2 / (a * a)) / 2.0)
    return amp[:, None] * np.column_stack([-d[:, 1], d[:, 0]])


def init_taylor_vortex_pair(cfg):
    box = cfg_mod.resolve_box(cfg)
    pts, _, _, _ = lattice(box, cfg.spacing)
    cx = 0.5 * (box[0] + box[2])
    cy = 0.5 * (box[1] + box[3])
    half = 0.5 * cfg.vortex_sep
    u = taylor_vortex_velocity(pts, np.array([cx - half, cy]),
                               cfg.vortex_u, cfg.vortex_a)
    u += taylor_vortex_velocity(pts, np.array([cx + half, cy]),
                                cfg.vortex_u, cfg.vortex_a)
    return SceneData(x_f=pts, u_f=u, x_s=np.empty((0, 2)), box=box)


def gaussian_vortex_velocity(pts, center, gamma, sigma):
    """Regularized point vortex with a Gaussian core."""
    d = pts - center
    r2 = np.sum(d * d, axis=1)
    r2 = np.maximum(r2, 1e-30)
    circ = gamma / (2.0 * np.pi * r2) * (1.0 - np.exp(-r2 / (2.0 * sigma ** 2)))
    return circ[:, None] * np.column_stack([-d[:, 1], d[:, 0]])


def init_leapfrog(cfg):
    """Two co-propagating vortex pairs on the left, one behind the other.

    Each pair is mirror-symmetric across the horizontal midline (+gamma on
    top, -gamma below, so the pair translates rightward); the rear pair
    starts leapfrog_offset behind the front one.
    """
    box = cfg_mod.resolve_box(cfg)
    pts, _, _, _ = lattice(box, cfg.spacing)
    yc = 0.5 * (box[1] + box[3])
    x0 = box[0] + cfg.leapfrog_x
    u = np.zeros_like(pts)
    for dx in (0.0, cfg.leapfrog_offset):
        for s in (1.0, -1.0):
            center = np.array([x0 + dx, yc + s * cfg.leapfrog_gap])
            u += gaussian_vortex_velocity(pts, center, s * cfg.leapfrog_gamma,
                                          cfg.leapfrog_sigma)
    return SceneData(x_f=pts, u_f=u, x_s=np.empty((0, 2)), box=box)


def init_hydrostatic_pool(cfg):
    box = cfg_mod.resolve_box(cfg)
    pts, _, solid = _walled_lattice(cfg, box)
    fluid = ~solid & (pts[:, 1] < box[1] + cfg.pool_height)
    return SceneData(
        x_f=pts[fluid], u_f=np.zeros((int(fluid.sum()), 2)),
        x_s=pts[solid], box=box,
        gravity=np.array([cfg.gravity_x, cfg.gravity_y]),
    )


def init_droplet_pool(cfg):
    box = cfg_mod.resolve_box(cfg)
    pts, _, solid = _walled_lattice(cfg, box)
    pool = ~solid & (pts[:, 1] < box[1] + cfg.pool_height)
    c = np.array([box[0] + cfg.droplet_x, box[1] + cfg.droplet_y])
    drop = ~solid & ~pool & (
        np.sum((pts - c) ** 2, axis=1) <= cfg.droplet_radius ** 2)
    x_f = np.vstack([pts[pool], pts[drop]])
    u_f = np.zeros_like(x_f)
    u_f[int(pool.sum()):, 1] = -cfg.droplet_speed
    return SceneData(
        x_f=x_f, u_f=u_f, x_s=pts[solid], box=box,
        gravity=np.array([cfg.gravity_x, cfg.gravity_y]),
    )


def init_dam_break(cfg):
    box = cfg_mod.resolve_box(cfg)
    pts, _, solid = _walled_lattice(cfg, box)
    width = box[2] - box[0]
    fluid = (~solid
             & (pts[:, 0] < box[0] + cfg.dam_fraction * width)
             & (pts[:, 1] < box[1] + cfg.dam_height))
    return SceneData(
        x_f=pts[fluid], u_f=np.zeros((int(fluid.sum()), 2)),
        x_s=pts[solid], box=box,
        gravity=np.array([cfg.gravity_x, cfg.gravity_y]),
    )


INITIALIZERS = {
    "taylor_green": init_taylor_green,
    "taylor_vortex_pair": init_taylor_vortex_pair,
    "leapfrog": init_leapfrog,
    "hydrostatic_pool": init_hydrostatic_pool,
    "droplet_pool": init_droplet_pool,
    "dam_break": init_dam_break,
}


def build_scene(cfg):
    data = INITIALIZERS[cfg.scene](cfg)
    data.gravity = np.array([cfg.gravity_x, cfg.gravity_y])
    return data
