"""Discrete divergence, gradient and Laplacian on a Voronoi diagram.

Operators are assembled fresh every step from the facet geometry. The
divergence D maps per-cell vectors to volume-weighted scalars, the gradient
G maps per-cell scalars to volume-weighted vectors, and G = -D^T holds
exactly because both are built from the same per-facet coefficients. The
Laplacian is L = D V^-1 G, so -L is symmetric positive semi-definite.

Vector degrees of freedom are interleaved: dof 2i is the x component of
cell i, dof 2i+1 the y component.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import geometry as geo


@dataclass
class DiscreteOperators:
    D: sp.csr_matrix      # (n, 2n) volume-weighted divergence
    G: sp.csr_matrix      # (2n, n) volume-weighted gradient, G = -D^T
    Vdiag: np.ndarray     # (n,) cell volumes (floored)
    n: int


def volume_gradients(diagram):
    """Per-facet volume gradients and the per-cell diagonal.

    Returns (grad_ab, grad_ba, diag) where grad_ab[f] is the gradient of
    cell a's volume with respect to generator b, grad_ba[f] the gradient of
    b's volume with respect to a, and diag[i] the self gradient
    (negative sum of the neighbors' cross terms).
    """
    w = diagram.fac_area / diagram.fac_l
    xa = diagram.points[diagram.fac_a]
    xb = diagram.points[diagram.fac_b]
    bf = diagram.fac_centroid
    grad_ab = w[:, None] * (xb - bf)
    grad_ba = w[:, None] * (xa - bf)
    diag = np.zeros((diagram.n, 2))
    np.add.at(diag, diagram.fac_a, -grad_ba)
    np.add.at(diag, diagram.fac_b, -grad_ab)
    return grad_ab, grad_ba, diag


def build_operators(diagram):
    """Assemble D, G and the volume diagonal from the facet geometry."""
    n = diagram.n
    grad_ab, grad_ba, _ = volume_gradients(diagram)
    a = diagram.fac_a
    b = diagram.fac_b
    m = a.shape[0]

    # [Dv]_i = sum_f w [(b_f - x_i).v_i + (x_j - b_f).v_j]
    # row a: -grad_ba on v_a, +grad_ab on v_b; row b mirrored
    rows = np.concatenate([a, a, a, a, b, b, b, b])
    cols = np.concatenate([
        2 * a, 2 * a + 1, 2 * b, 2 * b + 1,
        2 * b, 2 * b + 1, 2 * a, 2 * a + 1,
    ])
    vals = np.concatenate([
        -grad_ba[:, 0], -grad_ba[:, 1], grad_ab[:, 0], grad_ab[:, 1],
        -grad_ab[:, 0], -grad_ab[:, 1], grad_ba[:, 0], grad_ba[:, 1],
    ])
    D = sp.coo_matrix((vals, (rows, cols)), shape=(n, 2 * n)).tocsr()
    G = (-D.T).tocsr()
    return DiscreteOperators(D=D, G=G, Vdiag=diagram.volumes.copy(), n=n)


def apply_divergence(ops, v):
    """Volume-weighted divergence [Dv]; pointwise estimate is [Dv]/V."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (ops.n, 2):
        raise ValueError(f"expected ({ops.n}, 2) vector field, got {v.shape}")
    return ops.D @ v.ravel()


def apply_gradient(ops, p):
    """Volume-weighted gradient [Gp]; pointwise estimate is [Gp]/V."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (ops.n,):
        raise ValueError(f"expected ({ops.n},) scalar field, got {p.shape}")
    return (ops.G @ p).reshape(ops.n, 2)


def assemble_laplacian(ops):
    """L = D V^-1 G as an explicit sparse matrix; -L is symmetric PSD."""
    vinv = sp.diags(np.repeat(1.0 / ops.Vdiag, 2))
    return (ops.D @ vinv @ ops.G).tocsr()


@dataclass
class FluidOperators:
    """Pressure operators reduced to the fluid cells.

    Rows of G cover fluid vector dofs; columns cover fluid pressures.
    FluidAir facets keep only the fluid column (air pressure is a zero
    Dirichlet value, eliminated); FluidSolid facets are dropped (Neumann).
    The pressure matrix is A = G^T V^-1 G, SPD when any air facet exists.
    """
    fluid_ids: np.ndarray   # (nf,) global cell ids of fluid cells
    index_of: np.ndarray    # (n,) global cell id -> fluid index, -1 elsewhere
    G: sp.csr_matrix        # (2 nf, nf)
    Vf: np.ndarray          # (nf,)
    A: sp.csr_matrix        # (nf, nf)
    pure_neumann: bool
    nf: int
    nbr_off: np.ndarray = field(default=None)   # fluid-fluid adjacency CSR
    nbr_idx: np.ndarray = field(default=None)


def build_fluid_operators(diagram):
    kinds = diagram.kinds
    fluid_ids = np.flatnonzero(kinds == geo.FLUID)
    nf = fluid_ids.shape[0]
    n = diagram.n
    index_of = np.full(n, -1, dtype=np.int64)
    index_of[fluid_ids] = np.arange(nf)

    fk = diagram.fac_kind
    w = diagram.fac_area / diagram.fac_l
    xa = diagram.points[diagram.fac_a]
    xb = diagram.points[diagram.fac_b]
    bf = diagram.fac_centroid

    rows_list, cols_list, vals_list = [], [], []

    ff = fk == geo.FACET_FLUID_FLUID
    if np.any(ff):
        ia = index_of[diagram.fac_a[ff]]
        ib = index_of[diagram.fac_b[ff]]
        ga = w[ff, None] * (xa[ff] - bf[ff])  # (x_a - b_f) weighted
        gb = w[ff, None] * (xb[ff] - bf[ff])
        # [Gp] row-block a: +ga p_a, -ga p_b; row-block b: +gb p_b, -gb p_a
        rows_list += [2 * ia, 2 * ia + 1, 2 * ia, 2 * ia + 1,
                      2 * ib, 2 * ib + 1, 2 * ib, 2 * ib + 1]
        cols_list += [ia, ia, ib, ib, ib, ib, ia, ia]
        vals_list += [ga[:, 0], ga[:, 1], -ga[:, 0], -ga[:, 1],
                      gb[:, 0], gb[:, 1], -gb[:, 0], -gb[:, 1]]

    fa = fk == geo.FACET_FLUID_AIR
    n_air_facets = int(np.count_nonzero(fa))
    if n_air_facets:
        af = diagram.fac_a[fa]
        bf_ids = diagram.fac_b[fa]
        fluid_side_is_a = kinds[af] == geo.FLUID
        gid = np.where(fluid_side_is_a, af, bf_ids)
        i = index_of[gid]
        xg = diagram.points[gid]
        gv = w[fa, None] * (xg - bf[fa])
        # air pressure is exactly zero: only the fluid column survives
        rows_list += [2 * i, 2 * i + 1]
        cols_list += [i, i]
        vals_list += [gv[:, 0], gv[:, 1]]

    if rows_list:
        rows = np.concatenate(rows_list)
        cols = np.concatenate(cols_list)
        vals = np.concatenate(vals_list)
    else:
        rows = np.empty(0, dtype=np.int64)
        cols = np.empty(0, dtype=np.int64)
        vals = np.empty(0)
    G = sp.coo_matrix((vals, (rows, cols)), shape=(2 * nf, nf)).tocsr()

    Vf = diagram.volumes[fluid_ids]
    vinv = sp.diags(np.repeat(1.0 / Vf, 2))
    A = (G.T @ vinv @ G).tocsr()

    # fluid-fluid adjacency in fluid-local indices (Jacobian fits, extrema)
    if np.any(ff):
        ia = index_of[diagram.fac_a[ff]]
        ib = index_of[diagram.fac_b[ff]]
        cell = np.concatenate([ia, ib])
        other = np.concatenate([ib, ia])
        order = np.argsort(cell, kind="stable")
        nbr_off = np.zeros(nf + 1, dtype=np.int64)
        np.cumsum(np.bincount(cell, minlength=nf), out=nbr_off[1:])
        nbr_idx = other[order]
    else:
        nbr_off = np.zeros(nf + 1, dtype=np.int64)
        nbr_idx = np.empty(0, dtype=np.int64)

    return FluidOperators(
        fluid_ids=fluid_ids, index_of=index_of, G=G, Vf=Vf, A=A,
        pure_neumann=(n_air_facets == 0), nf=nf,
        nbr_off=nbr_off, nbr_idx=nbr_idx,
    )


def fluid_divergence(fops, u):
    """Volume-weighted divergence [Du] on fluid cells (reduced operator)."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (fops.nf, 2):
        raise ValueError(f"expected ({fops.nf}, 2) field, got {u.shape}")
    return -(fops.G.T @ u.ravel())


def fluid_gradient(fops, p):
    """Volume-weighted gradient [Gp] on fluid cells (reduced operator)."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (fops.nf,):
        raise ValueError(f"expected ({fops.nf},) field, got {p.shape}")
    return (fops.G @ p).reshape(fops.nf, 2)


def pointwise_divergence(fops, u):
    """Divergence estimate [Du]/V per fluid cell."""
    return fluid_divergence(fops, u) / fops.Vf


def pointwise_gradient(fops, p):
    """Gradient estimate [Gp]/V per fluid cell."""
    return fluid_gradient(fops, p) / fops.Vf[:, None]
