"""Polygonal meshes: construction, edge splitting, validation, quality and I/O.

A mesh stores vertex coordinates, counter-clockwise vertex cycles for the
cells and the oriented list of boundary edges with integer markers.  Boundary
edges are oriented like the cell that owns them, so the outward normal of
edge ``(a, b)`` is the tangent ``b - a`` rotated clockwise.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import Voronoi, cKDTree

__all__ = [
    "MeshError",
    "MeshFormatError",
    "PolygonalMesh",
    "SplitMap",
    "MeshQualityReport",
    "signed_area",
    "polygon_centroid",
    "polygon_diameter",
    "chebyshev_center",
    "from_cells",
    "validate_mesh",
    "relabel_boundary",
    "generate_triangle_mesh",
    "generate_distorted_quad_mesh",
    "generate_voronoi_mesh",
    "split_edges",
    "check_quality",
    "format_mesh",
    "parse_mesh",
    "write_mesh",
    "read_mesh",
    "mesh_io",
]

MERGE_TOL = 1e-12
COLLINEAR_TOL = 1e-10


class MeshError(ValueError):
    """Raised for invalid meshes or failed mesh generation."""


class MeshFormatError(MeshError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# polygon primitives
# ---------------------------------------------------------------------------

def signed_area(coords) -> float:
    """Shoelace area; positive for counter-clockwise cycles."""
    p = np.asarray(coords, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(coords) -> np.ndarray:
    p = np.asarray(coords, dtype=float)
    # shift for accuracy on small cells far from the origin
    ref = p[0]
    q = p - ref
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return ref + np.array([cx, cy])


def polygon_diameter(coords) -> float:
    p = np.asarray(coords, dtype=float)
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def _min_vertex_distance(coords) -> float:
    p = np.asarray(coords, dtype=float)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def _inward_halfplanes(coords):
    """Unit inward normals ``n`` and offsets ``c`` with kernel = {x: n.x >= c}."""
    p = np.asarray(coords, dtype=float)
    t = np.roll(p, -1, axis=0) - p
    length = np.hypot(t[:, 0], t[:, 1])
    n = np.column_stack([-t[:, 1], t[:, 0]]) / length[:, None]
    c = (n * p).sum(1)
    return n, c


def chebyshev_center(coords) -> tuple[np.ndarray | None, float]:
    """Center and radius of the largest disc inside the polygon's kernel.

    The kernel is the intersection of the inward half-planes of all edges.
    Returns ``(None, 0.0)`` when the kernel is empty.
    """
    n, c = _inward_halfplanes(coords)
    # maximize r  s.t.  n_i . x - r >= c_i
    a_ub = np.column_stack([-n, np.ones(len(c))])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=-c,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    if res.status == 2:
        return None, 0.0
    if res.status != 0:
        raise MeshError(f"kernel linear program failed: {res.message}")
    return np.array(res.x[:2]), max(float(res.x[2]), 0.0)


def _is_simple(coords) -> bool:
    """True when no two non-adjacent edges of the cycle touch."""
    p = np.asarray(coords, dtype=float)
    m = len(p)
    if m < 3:
        return False
    if m == 3:
        return True
    a = p
    b = np.roll(p, -1, axis=0)
    i, j = np.triu_indices(m, k=2)
    keep = ~((i == 0) & (j == m - 1))
    i, j = i[keep], j[keep]

    def orient(p0, p1, q):
        return (p1[:, 0] - p0[:, 0]) * (q[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (q[:, 0] - p0[:, 0])

    scale = polygon_diameter(p) ** 2 * 1e-14
    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    proper = (o1 * o2 < -scale ** 2) & (o3 * o4 < -scale ** 2)
    # touching configurations (a vertex lying on a non-adjacent edge)
    def on_segment(p0, p1, q, o):
        lo = np.minimum(p0, p1) - 1e-14
        hi = np.maximum(p0, p1) + 1e-14
        inside = np.all((q >= lo) & (q <= hi), axis=1)
        return (np.abs(o) <= scale) & inside

    touch = (
        on_segment(a[i], b[i], a[j], o1)
        | on_segment(a[i], b[i], b[j], o2)
        | on_segment(a[j], b[j], a[i], o3)
        | on_segment(a[j], b[j], b[i], o4)
    )
    return not bool(np.any(proper | touch))


# ---------------------------------------------------------------------------
# the mesh type
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    vertices: np.ndarray
    cells: tuple
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        cells = tuple(np.asarray(c, dtype=np.int64).ravel() for c in self.cells)
        be = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        bm = np.asarray(self.boundary_markers, dtype=np.int64).ravel()
        for arr in (v, be, bm, *cells):
            arr.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundary_edges", be)
        object.__setattr__(self, "boundary_markers", bm)

    def __eq__(self, other):
        if not isinstance(other, PolygonalMesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and len(self.cells) == len(other.cells)
            and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells))
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and np.array_equal(self.boundary_markers, other.boundary_markers)
        )

    __hash__ = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_coords(self, k: int) -> np.ndarray:
        return self.vertices[self.cells[k]]

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted ``(i, j)`` pairs with ``i < j``."""
        pairs = set()
        for c in self.cells:
            for a, b in zip(c, np.roll(c, -1)):
                pairs.add((min(a, b), max(a, b)))
        return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    def boundary_vertices(self, markers=None) -> np.ndarray:
        mask = np.ones(len(self.boundary_markers), dtype=bool)
        if markers is not None:
            mask = np.isin(self.boundary_markers, list(markers))
        return np.unique(self.boundary_edges[mask].ravel())

    def areas(self) -> np.ndarray:
        return np.array([signed_area(self.cell_coords(k)) for k in range(self.n_cells)])

    def diameters(self) -> np.ndarray:
        return np.array([polygon_diameter(self.cell_coords(k)) for k in range(self.n_cells)])

    @property
    def h(self) -> float:
        return float(self.diameters().max())

    @property
    def domain_diameter(self) -> float:
        lo, hi = self.vertices.min(0), self.vertices.max(0)
        return float(np.hypot(*(hi - lo)))


def _boundary_from_cells(cells):
    directed: dict[tuple[int, int], int] = {}
    for k, c in enumerate(cells):
        for a, b in zip(c.tolist(), np.roll(c, -1).tolist()):
            if (a, b) in directed:
                raise MeshError(
                    f"cell {k}: directed edge ({a}, {b}) already used by cell "
                    f"{directed[(a, b)]} (orientation clash or edge shared by > 2 cells)"
                )
            directed[(a, b)] = k
    boundary = [(a, b) for (a, b) in directed if (b, a) not in directed]
    return boundary


def from_cells(vertices, cells, marker=1) -> PolygonalMesh:
    """Build a mesh, deriving boundary edges from single-incidence edges.

    ``marker`` is either an integer or a callable mapping an edge midpoint
    ``(x, y)`` to an integer.
    """
    v = np.asarray(vertices, dtype=float)
    cells = [np.asarray(c, dtype=np.int64) for c in cells]
    boundary = _boundary_from_cells(cells)
    # deterministic order: follow cell order
    order = {e: i for i, e in enumerate(boundary)}
    be = np.array(sorted(boundary, key=order.get), dtype=np.int64).reshape(-1, 2)
    if callable(marker):
        mid = 0.5 * (v[be[:, 0]] + v[be[:, 1]])
        bm = np.array([int(marker(x, y)) for x, y in mid], dtype=np.int64)
    else:
        bm = np.full(len(be), int(marker), dtype=np.int64)
    return PolygonalMesh(v, tuple(cells), be, bm)


def validate_mesh(mesh: PolygonalMesh) -> None:
    """Raise :class:`MeshError` if any mesh invariant is violated."""
    v = mesh.vertices
    if not np.all(np.isfinite(v)):
        raise MeshError("non-finite vertex coordinates")
    nv = len(v)
    used = np.zeros(nv, dtype=bool)
    for k, c in enumerate(mesh.cells):
        if len(c) < 3:
            raise MeshError(f"cell {k}: fewer than 3 vertices")
        if c.min() < 0 or c.max() >= nv:
            raise MeshError(f"cell {k}: vertex index out of range")
        if len(np.unique(c)) != len(c):
            raise MeshError(f"cell {k}: repeated vertex in cycle")
        used[c] = True
        coords = v[c]
        if signed_area(coords) <= 0.0:
            raise MeshError(f"cell {k}: not counter-clockwise (signed area <= 0)")
        if not _is_simple(coords):
            raise MeshError(f"cell {k}: cycle is not simple")
    if not used.all():
        raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} is not used by any cell")
    tol = MERGE_TOL * mesh.domain_diameter
    pairs = cKDTree(v).query_pairs(tol)
    if pairs:
        i, j = sorted(pairs)[0]
        raise MeshError(f"vertices {i} and {j} coincide")
    boundary = set(_boundary_from_cells(mesh.cells))
    given = set(map(tuple, mesh.boundary_edges.tolist()))
    if len(given) != len(mesh.boundary_edges) or given != boundary:
        raise MeshError("boundary_edges differ from the set of single-incidence edges")
    if len(mesh.boundary_markers) != len(mesh.boundary_edges):
        raise MeshError("one marker per boundary edge required")


def relabel_boundary(mesh: PolygonalMesh, predicate, marker: int) -> PolygonalMesh:
    """Return a copy where boundary edges whose midpoint satisfies ``predicate`` get ``marker``."""
    v = mesh.vertices
    mid = 0.5 * (v[mesh.boundary_edges[:, 0]] + v[mesh.boundary_edges[:, 1]])
    hit = np.array([bool(predicate(x, y)) for x, y in mid], dtype=bool)
    bm = mesh.boundary_markers.copy()
    bm[hit] = marker
    return PolygonalMesh(v, mesh.cells, mesh.boundary_edges, bm)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _min_angle(tri) -> float:
    p = np.asarray(tri)
    out = np.inf
    for k in range(3):
        a, b, c = p[k], p[(k + 1) % 3], p[(k + 2) % 3]
        u, w = b - a, c - a
        cosang = np.dot(u, w) / (np.linalg.norm(u) * np.linalg.norm(w))
        out = min(out, np.arccos(np.clip(cosang, -1.0, 1.0)))
    return out


def generate_triangle_mesh(n: int, jitter: float = 0.0, rng_seed: int = 0, max_retries: int = 20) -> PolygonalMesh:
    """Jittered structured triangulation of the unit square.

    Interior grid vertices are displaced by up to ``jitter / n`` per
    coordinate; each grid square is then split along the diagonal giving the
    larger minimum angle.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    if not 0.0 <= jitter < 0.3:
        raise MeshError("jitter must lie in [0, 0.3)")
    rng = np.random.default_rng(rng_seed)
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    base = np.column_stack([ii.ravel() / n, jj.ravel() / n])
    interior = (ii.ravel() > 0) & (ii.ravel() < n) & (jj.ravel() > 0) & (jj.ravel() < n)

    def idx(i, j):
        return j * (n + 1) + i

    for _ in range(max_retries):
        pts = base.copy()
        if jitter > 0:
            shift = rng.uniform(-1.0, 1.0, size=(int(interior.sum()), 2)) * jitter / n
            pts[interior] += shift
        cells = []
        ok = True
        for j in range(n):
            for i in range(n):
                a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
                options = [((a, b, c), (a, c, d)), ((a, b, d), (b, c, d))]
                scores = []
                for tris in options:
                    areas = [signed_area(pts[list(t)]) for t in tris]
                    if min(areas) <= 1e-12 / n ** 2:
                        scores.append(-np.inf)
                    else:
                        scores.append(min(_min_angle(pts[list(t)]) for t in tris))
                best = 1 if scores[1] > scores[0] + 1e-12 else 0
                if scores[best] == -np.inf:
                    ok = False
                    break
                cells.extend(options[best])
            if not ok:
                break
        if ok:
            mesh = from_cells(pts, cells)
            validate_mesh(mesh)
            return mesh
    raise MeshError(f"could not generate non-degenerate triangles after {max_retries} attempts")


def distortion_map(xi, zeta):
    s = 0.1 * np.sin(2 * np.pi * xi) * np.sin(2 * np.pi * zeta)
    return xi + s, zeta + s


def generate_distorted_quad_mesh(n: int) -> PolygonalMesh:
    """Uniform ``n x n`` quadrilateral grid pushed through the smooth distortion map."""
    if n < 2:
        raise MeshError("n must be >= 2")
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    xi, zeta = ii.ravel() / n, jj.ravel() / n
    x, y = distortion_map(xi, zeta)
    # the map is the identity on the boundary; remove round-off there
    on_bd = (ii.ravel() == 0) | (ii.ravel() == n) | (jj.ravel() == 0) | (jj.ravel() == n)
    x = np.where(on_bd, xi, x)
    y = np.where(on_bd, zeta, y)
    pts = np.column_stack([x, y])

    def idx(i, j):
        return j * (n + 1) + i

    cells = [
        (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1))
        for j in range(n)
        for i in range(n)
    ]
    mesh = from_cells(pts, cells)
    for k in range(mesh.n_cells):
        if not _is_simple(mesh.cell_coords(k)) or signed_area(mesh.cell_coords(k)) <= 0:
            raise MeshError(f"distorted cell {k} is not a simple counter-clockwise quad")
    validate_mesh(mesh)
    return mesh


_BOX = np.array([0.0, 1.0, 0.0, 1.0])


def _reflect(seeds):
    x, y = seeds[:, 0], seeds[:, 1]
    return np.vstack([
        seeds,
        np.column_stack([-x, y]),
        np.column_stack([2.0 - x, y]),
        np.column_stack([x, -y]),
        np.column_stack([x, 2.0 - y]),
    ])


def _clipped_cells(seeds):
    """Voronoi cells of ``seeds`` clipped to the unit square.

    Reflecting every seed across the four sides makes the sides themselves
    Voronoi edges, so the bounded regions of the original seeds are exactly
    the clipped cells.
    """
    vor = Voronoi(_reflect(seeds))
    verts = vor.vertices.copy()
    for col in (0, 1):
        for target in (0.0, 1.0):
            close = np.abs(verts[:, col] - target) < 1e-12
            verts[close, col] = target
    regions = []
    for k in range(len(seeds)):
        reg = vor.regions[vor.point_region[k]]
        if len(reg) < 3 or -1 in reg:
            raise MeshError(f"Voronoi cell of seed {k} is empty or unbounded after clipping")
        reg = np.asarray(reg, dtype=np.int64)
        p = verts[reg]
        ang = np.arctan2(p[:, 1] - p[:, 1].mean(), p[:, 0] - p[:, 0].mean())
        regions.append(reg[np.argsort(ang, kind="stable")])
    return verts, regions


def _separate_duplicates(seeds):
    seeds = seeds.copy()
    for _ in range(10):
        pairs = sorted(cKDTree(seeds).query_pairs(1e-10))
        if not pairs:
            return seeds
        for i, j in pairs:
            # fixed offset pattern keeps the result reproducible
            k = j % 8
            ang = 2.0 * np.pi * k / 8.0
            seeds[j] += 1e-7 * np.array([np.cos(ang), np.sin(ang)])
        seeds = np.clip(seeds, 1e-9, 1.0 - 1e-9)
    return seeds


def _merge_and_compact(verts, regions):
    """Merge coincident vertices, drop removable collinear ones, renumber."""
    tol = MERGE_TOL * np.sqrt(2.0)
    parent = np.arange(len(verts))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in sorted(cKDTree(verts).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(a) for a in range(len(verts))])
    cycles = []
    for k, reg in enumerate(regions):
        c = roots[reg]
        # drop consecutive repeats (cyclic)
        keep = c != np.roll(c, 1)
        c = c[keep] if keep.any() else c[:1]
        if len(c) < 3:
            raise MeshError(f"Voronoi cell {k} collapsed to fewer than 3 vertices")
        cycles.append(c)

    # a vertex may be dropped only if it is a straight angle in every cell using it
    straight: dict[int, bool] = {}
    for c in cycles:
        p = verts[c]
        prev = np.roll(p, 1, axis=0)
        nxt = np.roll(p, -1, axis=0)
        u, w = p - prev, nxt - p
        cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
        norm = np.hypot(u[:, 0], u[:, 1]) * np.hypot(w[:, 0], w[:, 1])
        flat = (np.abs(cross) <= COLLINEAR_TOL * norm) & ((u * w).sum(1) > 0)
        for vtx, f in zip(c.tolist(), flat.tolist()):
            straight[vtx] = straight.get(vtx, True) and f
    cycles = [np.array([a for a in c.tolist() if not straight[a]], dtype=np.int64) for c in cycles]

    used = np.unique(np.concatenate(cycles))
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], [remap[c] for c in cycles]


def generate_voronoi_mesh(n_seeds: int, n_lloyd: int = 50, rng_seed: int = 0, seeds=None) -> PolygonalMesh:
    """Centroidal-Voronoi-style polygonal mesh of the unit square.

    Seeds are drawn uniformly (or taken from ``seeds``), relaxed ``n_lloyd``
    times by moving each seed to the centroid of its clipped cell, and the
    final clipped diagram becomes the mesh.
    """
    if seeds is None:
        if n_seeds < 4:
            raise MeshError("n_seeds must be >= 4")
        rng = np.random.default_rng(rng_seed)
        seeds = rng.uniform(0.0, 1.0, size=(n_seeds, 2))
    else:
        seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
        if len(seeds) < 4:
            raise MeshError("at least 4 seeds are required")
    seeds = _separate_duplicates(seeds)
    for _ in range(n_lloyd):
        verts, regions = _clipped_cells(seeds)
        seeds = np.array([polygon_centroid(verts[r]) for r in regions])
        seeds = _separate_duplicates(seeds)
    verts, regions = _clipped_cells(seeds)
    verts, cycles = _merge_and_compact(verts, regions)
    for k, c in enumerate(cycles):
        if signed_area(verts[c]) <= 0.0:
            raise MeshError(f"Voronoi cell {k} has non-positive area")
    mesh = from_cells(verts, cycles)
    validate_mesh(mesh)
    total = mesh.areas().sum()
    if abs(total - 1.0) > 1e-10:
        raise MeshError(f"Voronoi cells cover area {total!r}, expected 1")
    return mesh


# ---------------------------------------------------------------------------
# edge splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitMap:
    """Provenance of every vertex of an edge-split mesh.

    Refined vertex ``v`` is either original vertex ``origin_vertex[v]`` or the
    point inserted on original edge ``origin_edge[v]``; the inserted point of
    edge ``edges[e] = (i, j)`` (``i < j``) sits at ``(1 - alpha) x_i + alpha x_j``.
    """

    alpha: float
    original: PolygonalMesh
    edges: np.ndarray
    edge_vertex: np.ndarray
    origin_vertex: np.ndarray
    origin_edge: np.ndarray = field(repr=False)

    @property
    def n_original_vertices(self) -> int:
        return self.original.n_vertices


def split_edges(mesh: PolygonalMesh, alpha: float = 0.5) -> tuple[PolygonalMesh, SplitMap]:
    if not 0.0 < alpha < 1.0:
        raise MeshError("alpha must lie in the open interval (0, 1)")
    edges = mesh.edges()
    nv = mesh.n_vertices
    ne = len(edges)
    lookup = {(int(a), int(b)): e for e, (a, b) in enumerate(edges)}
    v = mesh.vertices
    new_pts = (1.0 - alpha) * v[edges[:, 0]] + alpha * v[edges[:, 1]]
    vertices = np.vstack([v, new_pts])
    edge_vertex = nv + np.arange(ne, dtype=np.int64)

    cells = []
    for c in mesh.cells:
        out = np.empty(2 * len(c), dtype=np.int64)
        out[0::2] = c
        nxt = np.roll(c, -1)
        out[1::2] = [edge_vertex[lookup[(min(a, b), max(a, b))]] for a, b in zip(c.tolist(), nxt.tolist())]
        cells.append(out)

    bedges = []
    bmarkers = []
    for (a, b), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist()):
        mid = int(edge_vertex[lookup[(min(a, b), max(a, b))]])
        bedges += [(a, mid), (mid, b)]
        bmarkers += [m, m]

    refined = PolygonalMesh(vertices, tuple(cells), np.array(bedges, dtype=np.int64).reshape(-1, 2),
                            np.array(bmarkers, dtype=np.int64))
    origin_vertex = np.concatenate([np.arange(nv), -np.ones(ne, dtype=np.int64)])
    origin_edge = np.concatenate([-np.ones(nv, dtype=np.int64), np.arange(ne)])
    smap = SplitMap(float(alpha), mesh, edges, edge_vertex, origin_vertex, origin_edge)
    return refined, smap


# ---------------------------------------------------------------------------
# quality
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeshQualityReport:
    diameters: np.ndarray
    areas: np.ndarray
    kernel_radii: np.ndarray
    min_vertex_distances: np.ndarray

    @property
    def gamma1(self) -> float:
        return float((self.kernel_radii / self.diameters).min())

    @property
    def gamma2(self) -> float:
        return float((self.min_vertex_distances / self.diameters).min())

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def __str__(self):
        return (
            f"cells: {len(self.diameters)}\n"
            f"h: {self.h:.6e}\n"
            f"gamma1: {self.gamma1:.6e}\n"
            f"gamma2: {self.gamma2:.6e}\n"
            f"area: {self.areas.sum():.12f}\n"
        )


def check_quality(mesh: PolygonalMesh) -> MeshQualityReport:
    diam, area, rho, dmin = [], [], [], []
    for k in range(mesh.n_cells):
        p = mesh.cell_coords(k)
        diam.append(polygon_diameter(p))
        area.append(signed_area(p))
        rho.append(chebyshev_center(p)[1])
        dmin.append(_min_vertex_distance(p))
    return MeshQualityReport(np.array(diam), np.array(area), np.array(rho), np.array(dmin))


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def _g17(x: float) -> str:
    return format(float(x), ".17g")


def format_mesh(mesh: PolygonalMesh) -> str:
    out = io.StringIO()
    out.write("polymesh 1\n")
    out.write(f"{mesh.n_vertices} {mesh.n_cells} {len(mesh.boundary_edges)}\n")
    for x, y in mesh.vertices:
        out.write(f"{_g17(x)} {_g17(y)}\n")
    for c in mesh.cells:
        out.write(" ".join([str(len(c))] + [str(int(i)) for i in c]) + "\n")
    for (i, j), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist()):
        out.write(f"{i} {j} {m}\n")
    return out.getvalue()


def parse_mesh(text: str) -> PolygonalMesh:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError("unexpected end of file", pos + 1)
        pos += 1
        return pos, lines[pos - 1].split()

    ln, tok = take()
    if tok != ["polymesh", "1"]:
        raise MeshFormatError("expected header 'polymesh 1'", ln)
    ln, tok = take()
    try:
        nv, nc, nb = (int(t) for t in tok)
    except ValueError:
        raise MeshFormatError("expected '<nv> <nc> <nb>'", ln) from None
    if min(nv, nc, nb) < 0:
        raise MeshFormatError("negative count", ln)

    verts = np.empty((nv, 2))
    for k in range(nv):
        ln, tok = take()
        if len(tok) != 2:
            raise MeshFormatError("expected 'x y'", ln)
        try:
            verts[k] = [float(tok[0]), float(tok[1])]
        except ValueError:
            raise MeshFormatError("malformed coordinate", ln) from None
        if not np.all(np.isfinite(verts[k])):
            raise MeshFormatError("non-finite coordinate", ln)

    cells = []
    for k in range(nc):
        ln, tok = take()
        try:
            nums = [int(t) for t in tok]
        except ValueError:
            raise MeshFormatError("malformed cell", ln) from None
        if not nums or nums[0] != len(nums) - 1 or nums[0] < 3:
            raise MeshFormatError("cell vertex count does not match", ln)
        idx = nums[1:]
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshFormatError(f"cell {k} references a vertex index out of range", ln)
        if signed_area(verts[idx]) <= 0.0:
            raise MeshFormatError(f"cell {k} is not counter-clockwise", ln)
        cells.append(idx)

    be, bm = [], []
    for _ in range(nb):
        ln, tok = take()
        try:
            i, j, m = (int(t) for t in tok)
        except ValueError:
            raise MeshFormatError("expected 'i j marker'", ln) from None
        if not (0 <= i < nv and 0 <= j < nv):
            raise MeshFormatError("boundary edge index out of range", ln)
        be.append((i, j))
        bm.append(m)
    if pos != len(lines):
        raise MeshFormatError("trailing content", pos + 1)
    mesh = PolygonalMesh(verts, tuple(cells), np.array(be, dtype=np.int64).reshape(-1, 2), np.array(bm, dtype=np.int64))
    validate_mesh(mesh)
    return mesh


def write_mesh(path, mesh: PolygonalMesh) -> None:
    validate_mesh(mesh)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_mesh(mesh))


def read_mesh(path) -> PolygonalMesh:
    with open(path, encoding="utf-8") as fh:
        return parse_mesh(fh.read())


def mesh_io(path: str | os.PathLike, mode: str, mesh: PolygonalMesh | None = None) -> PolygonalMesh:
    """Read or write a mesh file; returns the mesh in both modes."""
    if mode == "read":
        return read_mesh(path)
    if mode == "write":
        if mesh is None:
            raise ValueError("write mode requires a mesh")
        write_mesh(path, mesh)
        return mesh
    raise ValueError(f"unknown mode {mode!r}")
