"""Element-level virtual element operators on an edge-split cell.

Local DOF layout: for a cell with ``N`` vertices the ``2N`` degrees of
freedom are the x-components of the vertex values in cycle order followed by
the y-components.  Vector-linear polynomials are expanded in the scaled basis

    (1, 0), (s, 0), (t, 0), (0, 1), (0, s), (0, t)

with ``s = (x - xc) / h`` and ``t = (y - yc) / h`` (centroid ``xc``,
diameter ``h``).

Everything here is computed from vertex coordinates and trace integrals of
piecewise-linear functions, which the trapezoid rule integrates exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import PolygonalMesh, SplitMap, polygon_centroid, polygon_diameter, signed_area
from .quadrature import integrate_cell, integrate_edge, trapezoid_weights

__all__ = [
    "CellGeometry",
    "LocalProjection",
    "LocalMatrices",
    "cell_geometry",
    "p1_dof_matrix",
    "rigid_motion_dofs",
    "build_projectors",
    "build_stabilization",
    "build_local_matrices",
    "local_load_from_mean",
    "build_local_load",
    "evaluate_p1",
    "gradient_p1",
    "interpolate_edge_point",
    "interpolate_dirichlet",
    "interpolate_global",
    "interpolate_traction",
]

EDGE_DEGREE = 5

# constant strain tensors of the test fields (s, 0), (0, t), (t, s), times h
_STRAIN_TESTS = (
    np.array([[1.0, 0.0], [0.0, 0.0]]),
    np.array([[0.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
)


@dataclass(frozen=True, eq=False)
class CellGeometry:
    coords: np.ndarray
    area: float
    centroid: np.ndarray
    diameter: float
    edge_lengths: np.ndarray
    normals: np.ndarray  # outward unit normal of edge (v_i, v_{i+1})

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())


def cell_geometry(coords) -> CellGeometry:
    p = np.asarray(coords, dtype=float)
    t = np.roll(p, -1, axis=0) - p
    length = np.hypot(t[:, 0], t[:, 1])
    normals = np.column_stack([t[:, 1], -t[:, 0]]) / length[:, None]
    return CellGeometry(p, signed_area(p), polygon_centroid(p), polygon_diameter(p), length, normals)


def p1_dof_matrix(geom: CellGeometry) -> np.ndarray:
    """DOF values (2N x 6) of the six scaled vector-linear basis fields."""
    s = (geom.coords[:, 0] - geom.centroid[0]) / geom.diameter
    t = (geom.coords[:, 1] - geom.centroid[1]) / geom.diameter
    scalar = np.column_stack([np.ones_like(s), s, t])
    return np.block([[scalar, np.zeros((geom.n, 3))], [np.zeros((geom.n, 3)), scalar]])


def rigid_motion_dofs(coords) -> np.ndarray:
    """DOF vectors (2N x 3) of the rigid motions (1, 0), (0, 1), (y, -x)."""
    p = np.asarray(coords, dtype=float)
    n = len(p)
    out = np.zeros((2 * n, 3))
    out[:n, 0] = 1.0
    out[n:, 1] = 1.0
    out[:n, 2] = p[:, 1]
    out[n:, 2] = -p[:, 0]
    return out


def _edge_functionals(geom: CellGeometry, vec: np.ndarray) -> np.ndarray:
    """Row acting on DOFs as sum_e (|e|/2) (v(a) + v(b)) . vec_e, with vec_e per edge."""
    half = 0.5 * geom.edge_lengths[:, None] * vec  # (N, 2) per edge
    per_vertex = half + np.roll(half, 1, axis=0)  # edge i and edge i-1 touch vertex i
    return np.concatenate([per_vertex[:, 0], per_vertex[:, 1]])


@dataclass(frozen=True, eq=False)
class LocalProjection:
    geometry: CellGeometry
    p1_dofs: np.ndarray  # (2N, 6)
    pi1_coeffs: np.ndarray  # (6, 2N)
    pi1_dof: np.ndarray  # (2N, 2N)
    pi0div: np.ndarray  # (2N,)
    pi0rot: np.ndarray  # (2N,)
    condition: float


def build_projectors(coords) -> LocalProjection:
    """Elliptic projector onto vector-linear fields and the cell averages of div and rot.

    The projector is fixed by three conditions: strain-energy orthogonality
    tested against the three constant strains, equal boundary means of both
    components, and equal integrated rotation.  Each condition is a linear
    functional on the DOFs that is exact for vector-linear fields, so the
    6 x 6 system is ``B @ D`` and the coefficients are ``(B @ D)^-1 B``.
    """
    geom = cell_geometry(coords)
    if geom.area <= 0.0:
        raise ValueError("cell must be counter-clockwise with positive area")
    n = geom.n
    h = geom.diameter
    dofs = p1_dof_matrix(geom)

    rows = []
    # integral of eps(v) : E over the cell = boundary integral of (E n) . v
    for strain in _STRAIN_TESTS:
        rows.append(_edge_functionals(geom, geom.normals @ strain.T) / h)
    w = trapezoid_weights(geom.coords)
    zeros = np.zeros(n)
    rows.append(np.concatenate([w, zeros]))
    rows.append(np.concatenate([zeros, w]))
    tangents = np.column_stack([-geom.normals[:, 1], geom.normals[:, 0]])
    rot_row = _edge_functionals(geom, tangents)
    rows.append(rot_row)
    functionals = np.vstack(rows)

    system = functionals @ dofs
    cond = float(np.linalg.cond(system))
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(f"projector system is singular (condition number {cond:.3e})")
    coeffs = np.linalg.solve(system, functionals)
    pi0div = _edge_functionals(geom, geom.normals) / geom.area
    pi0rot = rot_row / geom.area
    return LocalProjection(geom, dofs, coeffs, dofs @ coeffs, pi0div, pi0rot, cond)


def build_stabilization(proj: LocalProjection) -> np.ndarray:
    """Euclidean DOF inner product applied to the non-polynomial remainder."""
    r = np.eye(len(proj.pi1_dof)) - proj.pi1_dof
    return r.T @ r


def _strain_gram(geom: CellGeometry) -> np.ndarray:
    """|K| eps(m_a) : eps(m_b) for the six scaled basis fields."""
    h = geom.diameter
    eps = np.zeros((6, 2, 2))
    # d/dx of s and d/dy of t are 1/h
    eps[1] = [[1.0 / h, 0.0], [0.0, 0.0]]
    eps[2] = [[0.0, 0.5 / h], [0.5 / h, 0.0]]
    eps[4] = [[0.0, 0.5 / h], [0.5 / h, 0.0]]
    eps[5] = [[0.0, 0.0], [0.0, 1.0 / h]]
    return geom.area * np.einsum("aij,bij->ab", eps, eps)


@dataclass(frozen=True, eq=False)
class LocalMatrices:
    a_mu: np.ndarray
    b_div: np.ndarray
    load: np.ndarray | None = None

    def stiffness(self, mu: float, lam: float) -> np.ndarray:
        return 2.0 * mu * self.a_mu + lam * self.b_div


def build_local_matrices(proj: LocalProjection, f=None, *, stabilization_scale: float = 1.0,
                         degree: int = 8) -> LocalMatrices:
    """Unscaled strain part (consistency plus stabilization) and divergence part.

    The element stiffness is ``2 mu a_mu + lam b_div``.
    """
    gram = _strain_gram(proj.geometry)
    a_mu = proj.pi1_coeffs.T @ gram @ proj.pi1_coeffs
    if stabilization_scale:
        a_mu = a_mu + stabilization_scale * build_stabilization(proj)
    b_div = proj.geometry.area * np.outer(proj.pi0div, proj.pi0div)
    load = None if f is None else build_local_load(f, proj, degree)
    return LocalMatrices(0.5 * (a_mu + a_mu.T), b_div, load)


def local_load_from_mean(proj: LocalProjection, f_mean) -> np.ndarray:
    """Load vector for a body force whose cell average is ``f_mean``.

    The test function enters through its boundary average, so DOF ``j`` gets
    ``f_mean[c] |K| w_j / |dK|`` with ``w_j`` its trapezoid weight.
    """
    geom = proj.geometry
    w = trapezoid_weights(geom.coords) / geom.perimeter
    f_mean = np.asarray(f_mean, dtype=float)
    return geom.area * np.concatenate([f_mean[0] * w, f_mean[1] * w])


def build_local_load(f, proj: LocalProjection, degree: int = 8) -> np.ndarray:
    geom = proj.geometry
    f_mean = integrate_cell(f, geom.coords, degree) / geom.area
    return local_load_from_mean(proj, f_mean)


def evaluate_p1(proj: LocalProjection, coeffs, x, y) -> np.ndarray:
    """Values ``(m, 2)`` of the vector-linear field with scaled-basis ``coeffs``."""
    g = proj.geometry
    s = (np.asarray(x) - g.centroid[0]) / g.diameter
    t = (np.asarray(y) - g.centroid[1]) / g.diameter
    c = np.asarray(coeffs)
    return np.column_stack([c[0] + c[1] * s + c[2] * t, c[3] + c[4] * s + c[5] * t])


def gradient_p1(proj: LocalProjection, coeffs) -> np.ndarray:
    """Constant gradient ``G[i, j] = d u_i / d x_j``."""
    h = proj.geometry.diameter
    c = np.asarray(coeffs)
    return np.array([[c[1], c[2]], [c[4], c[5]]]) / h


# ---------------------------------------------------------------------------
# interpolants with exact edge moments
# ---------------------------------------------------------------------------

def interpolate_edge_point(u, a, b, alpha: float, degree: int = EDGE_DEGREE) -> np.ndarray:
    """Value at ``(1 - alpha) a + alpha b`` preserving the edge integral of ``u``.

    With the endpoint values fixed to ``u(a)``, ``u(b)``, the piecewise-linear
    trace has the same integral over the edge as ``u``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.hypot(*(b - a)))
    mean2 = 2.0 / length * integrate_edge(u, a, b, degree)
    ua = np.asarray(u(a[:1], a[1:]), dtype=float).reshape(-1)
    ub = np.asarray(u(b[:1], b[1:]), dtype=float).reshape(-1)
    return mean2 - alpha * ua - (1.0 - alpha) * ub


def interpolate_dirichlet(u, coords, alpha: float, degree: int = EDGE_DEGREE):
    """Split one cell and interpolate ``u`` on it.

    The inserted point of edge ``(z_i, z_{i+1})`` lies at fraction ``alpha``
    from ``z_i`` along the counter-clockwise cycle.  Returns the split cell's
    coordinates and its local DOF vector.
    """
    p = np.asarray(coords, dtype=float)
    n = len(p)
    q = np.roll(p, -1, axis=0)
    refined = np.empty((2 * n, 2))
    refined[0::2] = p
    refined[1::2] = (1.0 - alpha) * p + alpha * q
    vals = np.empty((2 * n, 2))
    vals[0::2] = np.asarray(u(p[:, 0], p[:, 1]), dtype=float)
    for i in range(n):
        vals[2 * i + 1] = interpolate_edge_point(u, p[i], q[i], alpha, degree)
    return refined, np.concatenate([vals[:, 0], vals[:, 1]])


def interpolate_global(u, mesh: PolygonalMesh, split: SplitMap, degree: int = EDGE_DEGREE) -> np.ndarray:
    """Global DOF vector (component blocks) of the edge-moment interpolant on the split mesh."""
    nv = mesh.n_vertices
    vals = np.empty((nv, 2))
    orig = split.original.vertices
    n0 = split.n_original_vertices
    vals[:n0] = np.asarray(u(orig[:, 0], orig[:, 1]), dtype=float)
    for e, (i, j) in enumerate(split.edges):
        vals[split.edge_vertex[e]] = interpolate_edge_point(u, orig[i], orig[j], split.alpha, degree)
    return np.concatenate([vals[:, 0], vals[:, 1]])


def boundary_mean(mesh: PolygonalMesh, dofs) -> np.ndarray:
    """Boundary average of the piecewise-linear trace of a global DOF vector."""
    nv = mesh.n_vertices
    dofs = np.asarray(dofs, dtype=float)
    be = mesh.boundary_edges
    v = mesh.vertices
    length = np.hypot(*(v[be[:, 1]] - v[be[:, 0]]).T)
    out = np.empty(2)
    for c in range(2):
        comp = dofs[c * nv:(c + 1) * nv]
        out[c] = (0.5 * length * (comp[be[:, 0]] + comp[be[:, 1]])).sum() / length.sum()
    return out


def interpolate_traction(u, mesh: PolygonalMesh, split: SplitMap, degree: int = EDGE_DEGREE) -> np.ndarray:
    """Edge-moment interpolant shifted to have zero boundary mean."""
    dofs = interpolate_global(u, mesh, split, degree)
    mean = boundary_mean(mesh, dofs)
    nv = mesh.n_vertices
    dofs[:nv] -= mean[0]
    dofs[nv:] -= mean[1]
    return dofs
