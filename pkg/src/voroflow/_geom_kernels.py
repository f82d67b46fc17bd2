"""Hot kernels for bounded Voronoi construction via half-plane clipping.

Each cell starts as the domain box and is cut by the perpendicular bisector
of every nearby generator. Candidates come from a uniform grid, visited in
expanding Chebyshev rings; a cell is finished once the guaranteed-covered
radius exceeds twice its farthest vertex distance (no further generator can
cut it).

All functions here are numba-compilable scalar loops; with VOROFLOW_NUMBA=0
they run un-jitted (slow but identical results).
"""

import numpy as np

from .backend import njit, prange

MAXV = 96

# wall edge sources (domain box sides)
WALL_S = -1
WALL_E = -2
WALL_N = -3
WALL_W = -4


@njit(cache=True)
def _clip_half_plane(vx, vy, vs, cnt, mx, my, ux, uy, src):
    """Clip polygon (vx, vy, edge-source vs) by {x : (x - m) . u <= 0}.

    Writes the result back in place, returns the new vertex count
    (-1 on buffer overflow).
    """
    ox = np.empty(MAXV)
    oy = np.empty(MAXV)
    os_ = np.empty(MAXV, np.int64)
    m = 0
    for k in range(cnt):
        k2 = k + 1
        if k2 == cnt:
            k2 = 0
        d1 = (vx[k] - mx) * ux + (vy[k] - my) * uy
        d2 = (vx[k2] - mx) * ux + (vy[k2] - my) * uy
        if d1 <= 0.0:
            if m >= MAXV:
                return -1
            ox[m] = vx[k]
            oy[m] = vy[k]
            if d1 == 0.0 and d2 > 0.0:
                # vertex lies exactly on the bisector; the edge after it is cut
                os_[m] = src
            else:
                os_[m] = vs[k]
            m += 1
            if d2 > 0.0 and d1 < 0.0:
                # leaving the half-plane: add intersection, edge source = src
                t = d1 / (d1 - d2)
                if m >= MAXV:
                    return -1
                ox[m] = vx[k] + t * (vx[k2] - vx[k])
                oy[m] = vy[k] + t * (vy[k2] - vy[k])
                os_[m] = src
                m += 1
        elif d2 < 0.0:
            # entering: add intersection, keeps the cut edge's source
            t = d1 / (d1 - d2)
            if m >= MAXV:
                return -1
            ox[m] = vx[k] + t * (vx[k2] - vx[k])
            oy[m] = vy[k] + t * (vy[k2] - vy[k])
            os_[m] = vs[k]
            m += 1
    # the vertex inserted on "leaving" starts the new bisector edge, but its
    # source was set above; fix edge sources: the edge starting at the
    # leaving-intersection runs along the bisector (source = src already set).
    for k in range(m):
        vx[k] = ox[k]
        vy[k] = oy[k]
        vs[k] = os_[k]
    return m


@njit(cache=True)
def _max_vert_dist2(vx, vy, cnt, px, py):
    md = 0.0
    for k in range(cnt):
        d = (vx[k] - px) ** 2 + (vy[k] - py) ** 2
        if d > md:
            md = d
    return md


@njit(cache=True, parallel=True)
def clip_cells(points, box, cs, ngx, ngy, grid_off, grid_ids):
    """Build all clipped cell polygons.

    Returns (verts, srcs, nv, vol, cen, status); status 0 ok, 1 overflow,
    2 degenerate (empty polygon).
    """
    n = points.shape[0]
    xmin, ymin, xmax, ymax = box[0], box[1], box[2], box[3]
    verts = np.zeros((n, MAXV, 2))
    srcs = np.full((n, MAXV), -9, np.int64)
    nv = np.zeros(n, np.int32)
    vol = np.zeros(n)
    cen = np.zeros((n, 2))
    status = np.zeros(n, np.int32)

    max_ring_x = ngx
    max_ring_y = ngy

    for i in prange(n):
        px = points[i, 0]
        py = points[i, 1]
        vx = np.empty(MAXV)
        vy = np.empty(MAXV)
        vs = np.empty(MAXV, np.int64)
        # domain box, CCW; edge k runs from vertex k to k+1
        vx[0] = xmin; vy[0] = ymin; vs[0] = WALL_S
        vx[1] = xmax; vy[1] = ymin; vs[1] = WALL_E
        vx[2] = xmax; vy[2] = ymax; vs[2] = WALL_N
        vx[3] = xmin; vy[3] = ymax; vs[3] = WALL_W
        cnt = 4

        cgx = int((px - xmin) / cs)
        cgy = int((py - ymin) / cs)
        if cgx < 0:
            cgx = 0
        if cgx >= ngx:
            cgx = ngx - 1
        if cgy < 0:
            cgy = 0
        if cgy >= ngy:
            cgy = ngy - 1

        maxd2 = _max_vert_dist2(vx, vy, cnt, px, py)
        max_ring = max_ring_x + max_ring_y + 2
        failed = False
        for ring in range(0, max_ring + 1):
            # security: every generator within (ring-1)*cs has been visited
            if ring >= 1:
                rg = (ring - 1) * cs
                if 4.0 * maxd2 <= rg * rg:
                    break
            any_cell = False
            for gx in range(cgx - ring, cgx + ring + 1):
                if gx < 0 or gx >= ngx:
                    continue
                for gy in range(cgy - ring, cgy + ring + 1):
                    if gy < 0 or gy >= ngy:
                        continue
                    # border of the ring only
                    if ring > 0 and (abs(gx - cgx) != ring and abs(gy - cgy) != ring):
                        continue
                    any_cell = True
                    gcell = gx * ngy + gy
                    for t in range(grid_off[gcell], grid_off[gcell + 1]):
                        j = grid_ids[t]
                        if j == i:
                            continue
                        ux = points[j, 0] - px
                        uy = points[j, 1] - py
                        d2 = ux * ux + uy * uy
                        if d2 > 4.0 * maxd2:
                            continue  # bisector cannot reach the polygon
                        mx = px + 0.5 * ux
                        my = py + 0.5 * uy
                        newc = _clip_half_plane(vx, vy, vs, cnt, mx, my, ux, uy, j)
                        if newc < 0:
                            failed = True
                            break
                        cnt = newc
                        maxd2 = _max_vert_dist2(vx, vy, cnt, px, py)
                        if cnt < 3:
                            break
                    if failed or cnt < 3:
                        break
                if failed or cnt < 3:
                    break
            if failed or cnt < 3:
                break
            if ring > 0 and not any_cell:
                break

        if failed:
            status[i] = 1
            continue
        if cnt < 3:
            status[i] = 2
            continue

        nv[i] = cnt
        for k in range(cnt):
            verts[i, k, 0] = vx[k]
            verts[i, k, 1] = vy[k]
            srcs[i, k] = vs[k]

        # shoelace area and polygon centroid
        a2 = 0.0
        cx = 0.0
        cy = 0.0
        for k in range(cnt):
            k2 = k + 1
            if k2 == cnt:
                k2 = 0
            cr = vx[k] * vy[k2] - vx[k2] * vy[k]
            a2 += cr
            cx += (vx[k] + vx[k2]) * cr
            cy += (vy[k] + vy[k2]) * cr
        area = 0.5 * a2
        vol[i] = area
        if area > 0.0:
            cen[i, 0] = cx / (6.0 * area)
            cen[i, 1] = cy / (6.0 * area)
        else:
            cen[i, 0] = px
            cen[i, 1] = py
            status[i] = 2
    return verts, srcs, nv, vol, cen, status


@njit(cache=True)
def collect_half_facets(srcs, nv, verts):
    """Emit one record per polygon edge whose source is another generator."""
    n = nv.shape[0]
    total = 0
    for i in range(n):
        for k in range(nv[i]):
            if srcs[i, k] >= 0:
                total += 1
    hf_cell = np.empty(total, np.int64)
    hf_src = np.empty(total, np.int64)
    hf_v0 = np.empty((total, 2))
    hf_v1 = np.empty((total, 2))
    m = 0
    for i in range(n):
        cnt = nv[i]
        for k in range(cnt):
            if srcs[i, k] >= 0:
                k2 = k + 1
                if k2 == cnt:
                    k2 = 0
                hf_cell[m] = i
                hf_src[m] = srcs[i, k]
                hf_v0[m, 0] = verts[i, k, 0]
                hf_v0[m, 1] = verts[i, k, 1]
                hf_v1[m, 0] = verts[i, k2, 0]
                hf_v1[m, 1] = verts[i, k2, 1]
                m += 1
    return hf_cell, hf_src, hf_v0, hf_v1
