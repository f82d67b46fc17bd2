"""Per-step diagnostics and the CSV output contracts."""

import numpy as np

from . import operators as ops_mod

ENERGY_HEADER = ("step,time,kinetic_energy,max_abs_divergence,"
                 "total_circulation,cg_iterations,cg_residual,wall_ms")
FRAME_HEADER = "id,kind,x,y,u,v,vorticity"
_FMT = "%.17g"


def kinetic_energy(Vf, u):
    """Volume-averaged kinetic energy of the fluid."""
    return float(0.5 * np.sum(Vf * np.sum(u * u, axis=1)) / np.sum(Vf))


def max_abs_divergence(fops, u):
    """Max pointwise |div u| over fluid cells."""
    if fops.nf == 0:
        return 0.0
    return float(np.max(np.abs(ops_mod.pointwise_divergence(fops, u))))


def compute_vorticity(fops, u):
    """Per-cell curl omega = d(u_y)/dx - d(u_x)/dy via the gradient operator."""
    gx = ops_mod.fluid_gradient(fops, u[:, 0])
    gy = ops_mod.fluid_gradient(fops, u[:, 1])
    return (gy[:, 0] - gx[:, 1]) / fops.Vf


def total_circulation(fops, u):
    omega = compute_vorticity(fops, u)
    return float(np.sum(omega * fops.Vf))


def smooth_cellwise(fops, field, passes=1):
    """Volume-weighted neighborhood averaging over fluid adjacency."""
    out = np.asarray(field, dtype=np.float64).copy()
    for _ in range(passes):
        acc = fops.Vf * out
        wsum = fops.Vf.copy()
        nxt = np.empty_like(out)
        for i in range(fops.nf):
            nbrs = fops.nbr_idx[fops.nbr_off[i]:fops.nbr_off[i + 1]]
            nxt[i] = (acc[i] + np.sum(fops.Vf[nbrs] * out[nbrs])) / (
                wsum[i] + np.sum(fops.Vf[nbrs]))
        out = nxt
    return out


def vorticity_extrema(fops, x_f, omega, rel_threshold=0.5):
    """Local maxima of |omega| above rel_threshold x global max.

    A fluid cell counts when its |omega| is >= every fluid neighbor's.
    Returns (positions, magnitudes) sorted by magnitude, strongest first.
    """
    mag = np.abs(omega)
    if mag.size == 0 or np.max(mag) == 0.0:
        return np.empty((0, 2)), np.empty(0)
    cut = rel_threshold * np.max(mag)
    hits = []
    for i in range(fops.nf):
        if mag[i] < cut:
            continue
        nbrs = fops.nbr_idx[fops.nbr_off[i]:fops.nbr_off[i + 1]]
        if nbrs.size == 0 or np.all(mag[i] >= mag[nbrs]):
            hits.append(i)
    hits = np.array(hits, dtype=np.int64)
    order = np.argsort(-mag[hits], kind="stable")
    hits = hits[order]
    return x_f[hits], mag[hits]


def cluster_extrema(positions, magnitudes, min_dist):
    """Greedy merge of extrema closer than min_dist, keeping the strongest."""
    kept_pos = []
    kept_mag = []
    for pos, m in zip(positions, magnitudes):
        if all(np.hypot(*(pos - q)) >= min_dist for q in kept_pos):
            kept_pos.append(pos)
            kept_mag.append(m)
    return np.array(kept_pos).reshape(-1, 2), np.array(kept_mag)


def count_vortices(fops, x_f, u, passes=4, rel_threshold=0.5, min_dist=0.2):
    """Distinct vortex cores: local |omega| maxima above half the global max.

    The raw cell-wise vorticity is noisy at particle scale, so the field is
    smoothed before peak detection and nearby peaks are merged.
    """
    omega = smooth_cellwise(fops, compute_vorticity(fops, u), passes=passes)
    pos, mag = vorticity_extrema(fops, x_f, omega, rel_threshold)
    pos, mag = cluster_extrema(pos, mag, min_dist)
    return len(mag)


def energy_row(step, time, ke, max_div, circ, cg_iters, cg_res, wall_ms):
    vals = [_FMT % v for v in (time, ke, max_div, circ)]
    return (f"{step},{vals[0]},{vals[1]},{vals[2]},{vals[3]},"
            f"{cg_iters},{_FMT % cg_res},{_FMT % wall_ms}")


def frame_rows(ids, kinds, xy, uv, vorticity_by_fluid_row):
    """Snapshot rows; vorticity is per fluid row, empty for solid/air."""
    lines = []
    fl = 0
    for i in range(ids.shape[0]):
        x, y = xy[i]
        u, v = uv[i]
        if int(kinds[i]) == 0:
            w = _FMT % vorticity_by_fluid_row[fl]
            fl += 1
        else:
            w = ""
        lines.append(f"{ids[i]},{int(kinds[i])},{_FMT % x},{_FMT % y},"
                     f"{_FMT % u},{_FMT % v},{w}")
    return lines
