"""Per-particle flow-map state and the covector transport identities.

Each fluid particle remembers where it started (x_init, u_init), the
backward Jacobian T of the map from now back to that start time, the path
integral lambda_acc of the Lagrangian pressure, and the accumulated body
force. The particle trajectory itself is the flow map; T is recovered from
neighbor positions by a least-squares affine fit.
"""

from dataclasses import dataclass

import numpy as np

from . import _flow_kernels as fk
from . import geometry as geo


class RankDeficient(RuntimeError):
    """Neighborhood too small or collinear for a Jacobian fit."""


@dataclass
class FlowMapState:
    x_init: np.ndarray       # (nf, 2) positions at map start time s
    u_init: np.ndarray       # (nf, 2) velocities at s
    T: np.ndarray            # (nf, 2, 2) backward Jacobians d x_s / d x_r
    lambda_acc: np.ndarray   # (nf,) integral of p - |u|^2/2 since s
    gravity_acc: np.ndarray  # (nf, 2) integral of g since s
    near_surface: np.ndarray  # (nf,) bool, sticky until reinit
    force_reinit: np.ndarray  # (nf,) bool, set on rank-deficient fits
    since_reinit: int


def make_state(x, u):
    nf = x.shape[0]
    return FlowMapState(
        x_init=np.array(x, dtype=np.float64),
        u_init=np.array(u, dtype=np.float64),
        T=np.tile(np.eye(2), (nf, 1, 1)),
        lambda_acc=np.zeros(nf),
        gravity_acc=np.zeros((nf, 2)),
        near_surface=np.zeros(nf, dtype=bool),
        force_reinit=np.zeros(nf, dtype=bool),
        since_reinit=0,
    )


def reinitialize(state, x, u):
    """Restart the map at the current state: T = I, integrals cleared."""
    state.x_init[:] = x
    state.u_init[:] = u
    state.T[:] = np.eye(2)
    state.lambda_acc[:] = 0.0
    state.gravity_acc[:] = 0.0
    state.near_surface[:] = False
    state.force_reinit[:] = False
    state.since_reinit = 0
    return state


def advect_positions(x, u, dt):
    """One forward-Euler trajectory sample; realizes both map directions."""
    return x + u * dt


def estimate_jacobian(x_init_i, x_now_i, neighbors):
    """Least-squares T for a single particle from (x_init_j, x_now_j) pairs.

    Exact for affine flows. Raises RankDeficient when the current
    neighborhood spans less than two independent directions.
    """
    c = np.zeros((2, 2))
    m = np.zeros((2, 2))
    cnt = 0
    for x_init_j, x_now_j in neighbors:
        dr = np.asarray(x_now_j, dtype=np.float64) - x_now_i
        ds = np.asarray(x_init_j, dtype=np.float64) - x_init_i
        c += np.outer(dr, dr)
        m += np.outer(ds, dr)
        cnt += 1
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    tr = c[0, 0] + c[1, 1]
    if cnt < 3 or det <= fk.RANK_TOL * tr * tr:
        raise RankDeficient(f"{cnt} neighbors span a degenerate fit")
    return m @ np.linalg.inv(c)


def update_jacobians(state, x_now, nbr_off, nbr_idx):
    """Refit all T from the fluid adjacency. Bad fits keep the previous T;
    the returned mask lets the caller pick the degradation policy (global
    reinit in base mode, one-step branch in boundary mode)."""
    T_out = np.empty_like(state.T)
    bad = np.zeros(state.T.shape[0], dtype=bool)
    fk.fit_jacobians(nbr_off, nbr_idx, state.x_init, x_now,
                     state.T, T_out, bad)
    state.T = T_out
    return bad


def evolve_jacobians(state, grad_u, dt):
    """ODE variant: T <- T (I - dt nabla u), first order in dt."""
    step = np.tile(np.eye(2), (grad_u.shape[0], 1, 1)) - dt * grad_u
    state.T = np.einsum("nij,njk->nik", state.T, step)
    return state


def map_velocity(state):
    """Covector pullback u^M = T^T u_init plus the accumulated body force."""
    return np.einsum("nji,nj->ni", state.T, state.u_init) + state.gravity_acc


def fuse_to_advected(u_M, grad_lambda_acc, grad_half_u2, dt):
    """Convert the long-range mapped velocity into the one-step advected
    velocity: u^A = u^M - grad Lambda + dt grad(|u|^2 / 2)."""
    return u_M - grad_lambda_acc + dt * grad_half_u2


def accumulate_lambda(state, p, u, dt):
    """lambda_acc += (p - |u|^2/2) dt with post-projection p and u."""
    state.lambda_acc += (p - 0.5 * np.sum(u * u, axis=1)) * dt
    return state.lambda_acc


def flag_near_surface(state, diagram, fops, k, sticky=True):
    """Mark fluid particles within k fluid layers of an air cell.

    Layer 0 is every fluid cell sharing a facet with air; each extra layer
    marches once through fluid-fluid adjacency. With sticky=True the flags
    only accumulate until the next reinitialization.
    """
    nf = fops.nf
    flags = np.zeros(nf, dtype=bool)
    fa = diagram.fac_kind == geo.FACET_FLUID_AIR
    if np.any(fa):
        ga = diagram.fac_a[fa]
        gb = diagram.fac_b[fa]
        fluid_cells = np.where(diagram.kinds[ga] == geo.FLUID, ga, gb)
        flags[fops.index_of[fluid_cells]] = True
        frontier = flags.copy()
        for _ in range(k):
            nxt = np.zeros(nf, dtype=bool)
            ids = np.flatnonzero(frontier)
            for i in ids:
                nxt[fops.nbr_idx[fops.nbr_off[i]:fops.nbr_off[i + 1]]] = True
            nxt &= ~flags
            flags |= nxt
            frontier = nxt
    if sticky:
        state.near_surface |= flags
    else:
        state.near_surface = flags
    return state.near_surface
