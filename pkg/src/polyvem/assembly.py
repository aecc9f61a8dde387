"""Global DOF numbering, sparse assembly, boundary conditions and linear solves.

Global DOF ``v`` is the x-component at mesh vertex ``v`` and ``V + v`` its
y-component (``V`` vertices).  Pure-traction problems are bordered by three
multiplier rows: the boundary integrals of both components and the integrated
rotation.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import PolygonalMesh
from .quadrature import cell_quadrature, edge_rule
from .vem_local import LocalMatrices, LocalProjection, build_local_matrices, build_projectors, local_load_from_mean

__all__ = [
    "BoundarySpec",
    "BoundarySpecError",
    "SolverError",
    "DofMap",
    "Discretization",
    "GlobalSystem",
    "SolveReport",
    "Solution",
    "assemble",
    "apply_dirichlet",
    "constraint_vectors",
    "build_traction_system",
    "solve",
]


class BoundarySpecError(ValueError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


@dataclass(frozen=True)
class BoundarySpec:
    """Which boundary markers carry displacement or traction data.

    ``g1(x, y)`` returns ``(m, 2)`` displacements; ``g2(x, y, n)`` returns
    ``(m, 2)`` tractions for the outward unit normal ``n`` of the edge.  A
    missing field means zero data.
    """

    dirichlet: frozenset = frozenset()
    g1: object = None
    neumann: frozenset = frozenset()
    g2: object = None
    pure_traction: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dirichlet", frozenset(self.dirichlet))
        object.__setattr__(self, "neumann", frozenset(self.neumann))

    def validate(self, mesh: PolygonalMesh) -> None:
        if self.pure_traction and self.dirichlet:
            raise BoundarySpecError("pure traction excludes Dirichlet markers")
        overlap = self.dirichlet & self.neumann
        if overlap:
            raise BoundarySpecError(f"markers {sorted(overlap)} carry two conditions")
        present = set(np.unique(mesh.boundary_markers).tolist())
        uncovered = present - self.dirichlet - self.neumann
        if uncovered:
            raise BoundarySpecError(f"boundary markers {sorted(uncovered)} have no condition")
        missing = (self.dirichlet | self.neumann) - present
        if missing:
            raise BoundarySpecError(f"markers {sorted(missing)} match no boundary edge")
        if not self.pure_traction and not self.dirichlet:
            raise BoundarySpecError("traction on the whole boundary requires pure_traction=True")


@dataclass(frozen=True, eq=False)
class DofMap:
    n_vertices: int
    gathers: tuple

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_vertices

    @classmethod
    def from_mesh(cls, mesh: PolygonalMesh) -> "DofMap":
        nv = mesh.n_vertices
        return cls(nv, tuple(np.concatenate([c, c + nv]) for c in mesh.cells))


class Discretization:
    """Mesh plus the per-cell projectors and unscaled matrices (material independent)."""

    def __init__(self, mesh: PolygonalMesh, stabilization_scale: float = 1.0):
        self.mesh = mesh
        self.dofmap = DofMap.from_mesh(mesh)
        self.projections: list[LocalProjection] = []
        self.matrices: list[LocalMatrices] = []
        for k in range(mesh.n_cells):
            proj = build_projectors(mesh.cell_coords(k))
            self.projections.append(proj)
            self.matrices.append(build_local_matrices(proj, stabilization_scale=stabilization_scale))
        self._quad: dict[int, tuple] = {}

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    def quadrature(self, degree: int = 8):
        """Concatenated cell quadrature: points, weights, owning cell index."""
        if degree not in self._quad:
            pts, wts, ids = [], [], []
            for k in range(self.mesh.n_cells):
                p, w = cell_quadrature(self.mesh.cell_coords(k), degree)
                pts.append(p)
                wts.append(w)
                ids.append(np.full(len(w), k))
            self._quad[degree] = (np.vstack(pts), np.concatenate(wts), np.concatenate(ids))
        return self._quad[degree]

    def cell_means(self, f, degree: int = 8) -> np.ndarray:
        """Cell averages ``(n_cells, 2)`` of a vector field."""
        pts, w, ids = self.quadrature(degree)
        vals = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float).reshape(len(w), -1)
        sums = np.zeros((self.mesh.n_cells, vals.shape[1]))
        np.add.at(sums, ids, w[:, None] * vals)
        areas = np.array([p.geometry.area for p in self.projections])
        return sums / areas[:, None]

    @cached_property
    def _pattern(self):
        rows = np.concatenate([np.repeat(g, len(g)) for g in self.dofmap.gathers])
        cols = np.concatenate([np.tile(g, len(g)) for g in self.dofmap.gathers])
        return rows, cols

    def stiffness(self, mu: float, lam: float) -> sp.csr_matrix:
        rows, cols = self._pattern
        vals = np.concatenate([m.stiffness(mu, lam).ravel() for m in self.matrices])
        n = self.n_dofs
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


@dataclass(eq=False)
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    kind: str  # "spd" or "bordered"
    disc: Discretization
    spec: BoundarySpec
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constraints: np.ndarray | None = None  # (n_dofs, 3) for bordered systems

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0] - (3 if self.kind == "bordered" else 0)

    def symmetry_error(self) -> float:
        a = self.matrix
        diff = abs(a - a.T).max()
        return float(diff / max(abs(a).max(), 1e-300))


def _neumann_load(mesh: PolygonalMesh, spec: BoundarySpec, degree: int = 5) -> np.ndarray:
    nv = mesh.n_vertices
    rhs = np.zeros(2 * nv)
    if spec.g2 is None or not spec.neumann:
        return rhs
    mask = np.isin(mesh.boundary_markers, list(spec.neumann))
    rule = edge_rule(degree)
    s = rule.points
    v = mesh.vertices
    for a, b in mesh.boundary_edges[mask]:
        pa, pb = v[a], v[b]
        t = pb - pa
        length = float(np.hypot(*t))
        normal = np.array([t[1], -t[0]]) / length
        pts = pa[None, :] + s[:, None] * t[None, :]
        g = np.asarray(spec.g2(pts[:, 0], pts[:, 1], normal), dtype=float).reshape(len(s), 2)
        ga = length * ((rule.weights * (1.0 - s))[:, None] * g).sum(0)
        gb = length * ((rule.weights * s)[:, None] * g).sum(0)
        rhs[[a, nv + a]] += ga
        rhs[[b, nv + b]] += gb
    return rhs


def assemble(disc: Discretization | PolygonalMesh, mu: float, lam: float, f, spec: BoundarySpec,
             degree: int = 8) -> GlobalSystem:
    """Assemble ``2 mu A_mu + lam B_div``, the body load and Neumann tractions.

    Dirichlet data and traction multipliers are applied afterwards by
    :func:`apply_dirichlet` and :func:`build_traction_system`.
    """
    if isinstance(disc, PolygonalMesh):
        disc = Discretization(disc)
    spec.validate(disc.mesh)
    if mu <= 0 or lam < 0:
        raise ValueError("material requires mu > 0 and lam >= 0")
    matrix = disc.stiffness(mu, lam)
    rhs = np.zeros(disc.n_dofs)
    if f is not None:
        means = disc.cell_means(f, degree)
        for g, proj, fm in zip(disc.dofmap.gathers, disc.projections, means):
            rhs[g] += local_load_from_mean(proj, fm)
    rhs += _neumann_load(disc.mesh, spec)
    return GlobalSystem(matrix, rhs, "spd", disc, spec)


def apply_dirichlet(system: GlobalSystem) -> GlobalSystem:
    """Impose ``g1`` nodally at every vertex of a Dirichlet-marked edge by symmetric elimination."""
    spec = system.spec
    mesh = system.disc.mesh
    if not spec.dirichlet:
        return system
    verts = mesh.boundary_vertices(spec.dirichlet)
    if len(verts) == 0:
        raise BoundarySpecError(f"Dirichlet markers {sorted(spec.dirichlet)} match no boundary vertex")
    nv = mesh.n_vertices
    p = mesh.vertices[verts]
    if spec.g1 is None:
        g = np.zeros((len(verts), 2))
    else:
        g = np.asarray(spec.g1(p[:, 0], p[:, 1]), dtype=float).reshape(len(verts), 2)
    dofs = np.concatenate([verts, verts + nv])
    vals = np.concatenate([g[:, 0], g[:, 1]])
    n = system.matrix.shape[0]
    lifted = np.zeros(n)
    lifted[dofs] = vals
    rhs = system.rhs - system.matrix @ lifted
    keep = np.ones(n)
    keep[dofs] = 0.0
    d = sp.diags(keep)
    matrix = (d @ system.matrix @ d + sp.diags(1.0 - keep)).tocsr()
    rhs[dofs] = vals
    return GlobalSystem(matrix, rhs, "spd", system.disc, spec, np.sort(dofs), system.constraints)


def constraint_vectors(disc: Discretization) -> np.ndarray:
    """Columns: boundary integral of the x and y hats, and integrated rotation of each hat."""
    mesh = disc.mesh
    nv = mesh.n_vertices
    d = np.zeros((2 * nv, 3))
    v = mesh.vertices
    be = mesh.boundary_edges
    length = np.hypot(*(v[be[:, 1]] - v[be[:, 0]]).T)
    np.add.at(d[:, 0], be[:, 0], 0.5 * length)
    np.add.at(d[:, 0], be[:, 1], 0.5 * length)
    d[nv:, 1] = d[:nv, 0]
    for g, proj in zip(disc.dofmap.gathers, disc.projections):
        np.add.at(d[:, 2], g, proj.pi0rot * proj.geometry.area)
    return d


def build_traction_system(system: GlobalSystem, compat_tol: float = 0.1) -> GlobalSystem:
    """Border the stiffness matrix with the three multiplier constraints."""
    if not system.spec.pure_traction:
        raise BoundarySpecError("build_traction_system requires a pure-traction BoundarySpec")
    if len(system.constrained):
        raise BoundarySpecError("pure-traction systems cannot have Dirichlet DOFs")
    disc = system.disc
    d = constraint_vectors(disc)
    mesh = disc.mesh
    nv = mesh.n_vertices
    rigid = np.zeros((2 * nv, 3))
    rigid[:nv, 0] = 1.0
    rigid[nv:, 1] = 1.0
    rigid[:nv, 2] = mesh.vertices[:, 1]
    rigid[nv:, 2] = -mesh.vertices[:, 0]
    work = np.abs(system.rhs @ rigid)
    scale = np.abs(system.rhs) @ np.abs(rigid)
    if np.any(work > compat_tol * np.maximum(scale, 1e-300)) and np.any(scale > 0):
        warnings.warn(
            f"load is not compatible with rigid motions (|f.r| = {work.max():.3e}); "
            "multipliers absorb the mismatch",
            RuntimeWarning,
            stacklevel=2,
        )
    dm = sp.csr_matrix(d)
    matrix = sp.bmat([[system.matrix, dm], [dm.T, None]], format="csr")
    rhs = np.concatenate([system.rhs, np.zeros(3)])
    return GlobalSystem(matrix, rhs, "bordered", disc, system.spec, system.constrained, d)


@dataclass
class SolveReport:
    dofs: int
    nnz: int
    solver: str
    iterations: int
    relative_residual: float

    def __str__(self):
        return (
            f"dofs: {self.dofs}\n"
            f"nnz: {self.nnz}\n"
            f"solver: {self.solver}\n"
            f"iterations: {self.iterations}\n"
            f"relative_residual: {self.relative_residual:.3e}\n"
        )


@dataclass
class Solution:
    dofs: np.ndarray
    multipliers: np.ndarray | None
    report: SolveReport


def _relative_residual(a, x, b) -> float:
    r = np.linalg.norm(a @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


def solve(system: GlobalSystem, method: str = "direct", rtol: float = 1e-12, refine_steps: int = 3,
          maxiter: int | None = None) -> Solution:
    """Direct sparse LU (default) or Jacobi-preconditioned CG for the SPD path.

    For the direct path ``iterations`` counts the initial solve plus the
    refinement sweeps that were kept.  CG stops after ``maxiter`` iterations,
    by default ``20 n``.
    """
    a = system.matrix
    b = system.rhs
    n = a.shape[0]
    if system.kind == "bordered" and method != "direct":
        raise ValueError("bordered systems are solved directly")
    if method == "direct":
        try:
            lu = spla.splu(a.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverError("factorization produced non-finite values")
        res = _relative_residual(a, x, b)
        steps = 1
        # iterative refinement; helps when lam >> mu makes the matrix ill conditioned
        for _ in range(refine_steps):
            if res <= rtol:
                break
            x_new = x + lu.solve(b - a @ x)
            res_new = _relative_residual(a, x_new, b)
            if not res_new < res:
                break
            x, res = x_new, res_new
            steps += 1
        kind = "direct-lu" if system.kind == "spd" else "direct-lu-bordered"
        report = SolveReport(n, a.nnz, kind, steps, res)
    elif method == "cg":
        diag = a.diagonal()
        if np.any(diag <= 0):
            raise SolverError("zero or negative diagonal; matrix is not SPD")
        precond = spla.LinearOperator((n, n), matvec=lambda r: r / diag, dtype=float)
        history = []
        nb = np.linalg.norm(b)

        def record(xk):
            history.append(np.linalg.norm(a @ xk - b) / (nb if nb > 0 else 1.0))

        limit = 20 * n if maxiter is None else maxiter
        if nb == 0:
            x, info = np.zeros(n), 0
        else:
            x, info = spla.cg(a, b, rtol=rtol, atol=0.0, maxiter=limit, M=precond, callback=record)
        if info != 0:
            raise SolverError(f"CG did not converge in {limit} iterations", history)
        report = SolveReport(n, a.nnz, "cg-jacobi", len(history), _relative_residual(a, x, b))
    else:
        raise ValueError(f"unknown solver method {method!r}")
    m = system.n_dofs
    mult = x[m:] if system.kind == "bordered" else None
    return Solution(x[:m], mult, report)
