"""Bounded 2D Voronoi diagrams over all simulation particles.

The diagram is rebuilt from scratch every step: one cell per particle,
clipped to the domain box, with per-facet geometry (length, centroid,
normal, generator distances) and a material classification of each facet.
"""

from dataclasses import dataclass

import numpy as np

from . import _geom_kernels as gk

# particle material kinds
FLUID = 0
SOLID = 1
AIR = 2

# facet kinds
FACET_FLUID_FLUID = 0
FACET_FLUID_AIR = 1
FACET_FLUID_SOLID = 2
FACET_OTHER = 3

# thresholds (relative to mean spacing / spacing^2)
NEAR_DUPLICATE_REL = 1e-9
FACET_LENGTH_REL = 1e-10
VOLUME_FLOOR_REL = 1e-12


class GeometryError(ValueError):
    pass


class DegenerateInput(GeometryError):
    """Duplicate or collinear-only point sets."""


class OutOfDomain(GeometryError):
    """A point lies on or outside the domain box."""


@dataclass
class VoronoiDiagram:
    points: np.ndarray        # (n, 2) generator positions (possibly tie-broken)
    kinds: np.ndarray         # (n,) material kind per particle
    box: np.ndarray           # (4,) xmin, ymin, xmax, ymax
    spacing: float            # mean particle spacing used for thresholds
    volumes: np.ndarray       # (n,) clipped cell areas, floored
    volumes_raw: np.ndarray   # (n,) unclamped areas
    centroids: np.ndarray     # (n, 2) exact polygon centroids
    poly_off: np.ndarray      # (n+1,) CSR offsets into poly_xy
    poly_xy: np.ndarray       # (sum_nv, 2) polygon vertices, CCW
    fac_a: np.ndarray         # (m,) lower cell id per facet
    fac_b: np.ndarray         # (m,) higher cell id per facet
    fac_area: np.ndarray      # (m,) facet length A_ij
    fac_centroid: np.ndarray  # (m, 2) facet segment centroid b_ij
    fac_normal: np.ndarray    # (m, 2) unit normal from cell a toward cell b
    fac_l: np.ndarray         # (m,) generator distance l_ij
    fac_d: np.ndarray         # (m,) distance from either generator to the facet
    fac_kind: np.ndarray      # (m,) facet classification
    nbr_off: np.ndarray       # (n+1,) CSR offsets for per-cell adjacency
    nbr_cell: np.ndarray      # neighbor cell ids
    nbr_facet: np.ndarray     # facet id for each adjacency entry

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def n_facets(self):
        return self.fac_a.shape[0]

    def neighbors(self, i):
        return self.nbr_cell[self.nbr_off[i]:self.nbr_off[i + 1]]

    def facets_of(self, i):
        return self.nbr_facet[self.nbr_off[i]:self.nbr_off[i + 1]]

    def cell_polygon(self, i):
        return self.poly_xy[self.poly_off[i]:self.poly_off[i + 1]]


def classify_facet(kind_a, kind_b):
    ka, kb = int(kind_a), int(kind_b)
    if ka == FLUID and kb == FLUID:
        return FACET_FLUID_FLUID
    pair = {ka, kb}
    if pair == {FLUID, AIR}:
        return FACET_FLUID_AIR
    if pair == {FLUID, SOLID}:
        return FACET_FLUID_SOLID
    return FACET_OTHER


def _validate(points, box):
    if points.ndim != 2 or points.shape[1] != 2:
        raise GeometryError("points must be an (n, 2) array")
    if points.shape[0] < 3:
        raise DegenerateInput("need at least 3 points")
    if not np.all(np.isfinite(points)):
        raise GeometryError("non-finite point coordinates")
    xmin, ymin, xmax, ymax = box
    if not (xmax > xmin and ymax > ymin):
        raise GeometryError("invalid domain box")
    inside = (
        (points[:, 0] > xmin) & (points[:, 0] < xmax)
        & (points[:, 1] > ymin) & (points[:, 1] < ymax)
    )
    if not np.all(inside):
        bad = int(np.flatnonzero(~inside)[0])
        raise OutOfDomain(f"point {bad} lies outside the domain box")


def _tie_break_duplicates(points, spacing):
    """Perturb near-duplicates deterministically; error on exact duplicates."""
    from scipy.spatial import cKDTree

    tol = NEAR_DUPLICATE_REL * spacing
    tree = cKDTree(points)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    if pairs.size == 0:
        return points
    d = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    if np.any(d == 0.0):
        i, j = pairs[int(np.flatnonzero(d == 0.0)[0])]
        raise DegenerateInput(f"points {i} and {j} coincide exactly")
    points = points.copy()
    # shift the higher-id member of each near-duplicate pair along +x
    shift_ids = np.unique(np.max(pairs, axis=1))
    points[shift_ids, 0] += tol
    return points


def _check_not_collinear(points):
    p0 = points[0]
    d = points[1:] - p0
    cross = d[:, 0, None] * d[None, :, 1] if False else None  # noqa: F841
    # max |cross| between the first chord and all others
    ref = None
    for k in range(d.shape[0]):
        if np.hypot(d[k, 0], d[k, 1]) > 0:
            ref = d[k]
            break
    if ref is None:
        raise DegenerateInput("all points coincide")
    cr = np.abs(d[:, 0] * ref[1] - d[:, 1] * ref[0])
    scale = np.max(np.abs(d)) * np.hypot(ref[0], ref[1]) + 1e-300
    if np.max(cr) / scale < 1e-14:
        raise DegenerateInput("all points are collinear")


def build_diagram(points, kinds, box, spacing=None):
    """Bounded Voronoi diagram of all particles, clipped to the domain box."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    box = np.asarray(box, dtype=np.float64)
    kinds = np.asarray(kinds, dtype=np.int8)
    _validate(points, box)
    _check_not_collinear(points)

    n = points.shape[0]
    area = (box[2] - box[0]) * (box[3] - box[1])
    if spacing is None:
        spacing = float(np.sqrt(area / n))
    points = _tie_break_duplicates(points, spacing)

    # uniform grid for candidate lookup
    cs = 2.0 * spacing
    ngx = max(1, int(np.ceil((box[2] - box[0]) / cs)))
    ngy = max(1, int(np.ceil((box[3] - box[1]) / cs)))
    gx = np.minimum(((points[:, 0] - box[0]) / cs).astype(np.int64), ngx - 1)
    gy = np.minimum(((points[:, 1] - box[1]) / cs).astype(np.int64), ngy - 1)
    gidx = gx * ngy + gy
    order = np.argsort(gidx, kind="stable").astype(np.int64)
    grid_ids = order
    grid_off = np.zeros(ngx * ngy + 1, dtype=np.int64)
    np.cumsum(np.bincount(gidx, minlength=ngx * ngy), out=grid_off[1:])

    verts, srcs, nv, vol_raw, cen, status = gk.clip_cells(
        points, box, cs, ngx, ngy, grid_off, grid_ids
    )
    if np.any(status == 1):
        raise GeometryError("cell polygon exceeded vertex buffer")
    if np.any(status == 2):
        bad = int(np.flatnonzero(status == 2)[0])
        raise DegenerateInput(f"cell {bad} clipped to an empty polygon")

    # half-facets -> unique facets, preferring the lower cell id's geometry
    hf_cell, hf_src, hf_v0, hf_v1 = gk.collect_half_facets(srcs, nv, verts)
    lo = np.minimum(hf_cell, hf_src)
    hi = np.maximum(hf_cell, hf_src)
    key = lo * n + hi
    order = np.argsort(key, kind="stable")
    skey = key[order]
    first = np.ones(skey.shape[0], dtype=bool)
    first[1:] = skey[1:] != skey[:-1]
    pick = order[first]
    # among duplicates the stable sort keeps emission order (cell-major),
    # so the lower cell id's half-facet is picked; singletons survive too
    fa = lo[pick]
    fb = hi[pick]
    v0 = hf_v0[pick]
    v1 = hf_v1[pick]

    seg = v1 - v0
    length = np.hypot(seg[:, 0], seg[:, 1])
    keep = length >= FACET_LENGTH_REL * spacing
    fa, fb, v0, v1, length = fa[keep], fb[keep], v0[keep], v1[keep], length[keep]

    dxy = points[fb] - points[fa]
    l = np.hypot(dxy[:, 0], dxy[:, 1])
    normal = dxy / l[:, None]
    fcent = 0.5 * (v0 + v1)
    fkind = _facet_kinds(kinds[fa], kinds[fb])

    # adjacency CSR (facets listed from both sides)
    m = fa.shape[0]
    cell_of = np.concatenate([fa, fb])
    other = np.concatenate([fb, fa])
    facid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.argsort(cell_of, kind="stable")
    nbr_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(cell_of, minlength=n), out=nbr_off[1:])
    nbr_cell = other[order]
    nbr_facet = facid[order]

    # polygon CSR
    poly_off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(nv.astype(np.int64), out=poly_off[1:])
    poly_xy = np.empty((poly_off[-1], 2))
    for i in range(n):
        poly_xy[poly_off[i]:poly_off[i + 1]] = verts[i, : nv[i]]

    floor = VOLUME_FLOOR_REL * spacing * spacing
    volumes = np.maximum(vol_raw, floor)

    return VoronoiDiagram(
        points=points, kinds=kinds, box=box, spacing=float(spacing),
        volumes=volumes, volumes_raw=vol_raw, centroids=cen,
        poly_off=poly_off, poly_xy=poly_xy,
        fac_a=fa, fac_b=fb, fac_area=length, fac_centroid=fcent,
        fac_normal=normal, fac_l=l, fac_d=0.5 * l, fac_kind=fkind,
        nbr_off=nbr_off, nbr_cell=nbr_cell, nbr_facet=nbr_facet,
    )


def _facet_kinds(ka, kb):
    out = np.full(ka.shape[0], FACET_OTHER, dtype=np.int8)
    ff = (ka == FLUID) & (kb == FLUID)
    fa_ = ((ka == FLUID) & (kb == AIR)) | ((ka == AIR) & (kb == FLUID))
    fs = ((ka == FLUID) & (kb == SOLID)) | ((ka == SOLID) & (kb == FLUID))
    out[ff] = FACET_FLUID_FLUID
    out[fa_] = FACET_FLUID_AIR
    out[fs] = FACET_FLUID_SOLID
    return out


def cell_geometry(diagram, cell_id):
    """Clipped cell area (floored) and exact polygon centroid."""
    if not 0 <= cell_id < diagram.n:
        raise IndexError(f"invalid cell id {cell_id}")
    return float(diagram.volumes[cell_id]), diagram.centroids[cell_id].copy()


def dump_polygons(diagram):
    """Text dump of all cell polygons, one line per cell."""
    lines = []
    for i in range(diagram.n):
        poly = diagram.cell_polygon(i)
        coords = " ".join(f"{x:.17g},{y:.17g}" for x, y in poly)
        lines.append(f"cell {i} kind {int(diagram.kinds[i])}: {coords}")
    return "\n".join(lines) + "\n"
