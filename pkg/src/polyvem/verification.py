"""Manufactured solutions, error norms, rate fits and convergence studies."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import (
    BoundarySpec,
    Discretization,
    Solution,
    apply_dirichlet,
    assemble,
    build_traction_system,
    solve,
)
from .mesh import (
    PolygonalMesh,
    generate_distorted_quad_mesh,
    generate_triangle_mesh,
    generate_voronoi_mesh,
    relabel_boundary,
    split_edges,
)

__all__ = [
    "CaseConsistencyError",
    "ManufacturedCase",
    "ErrorReport",
    "ConvergenceTable",
    "RunResult",
    "case_patch",
    "case_test1",
    "case_test2",
    "case_test3",
    "case_traction",
    "make_case",
    "CASES",
    "build_mesh",
    "compute_errors",
    "discretize",
    "divergence_norm",
    "projected_coefficients",
    "fit_rate",
    "solve_case",
    "run_study",
]

FD_STEP = 1e-5
PI = math.pi


class CaseConsistencyError(ValueError):
    """The body force or gradient of a case disagrees with its displacement."""


def _check_material(lam, mu):
    if not (lam > 0 and mu > 0):
        raise ValueError("Lame constants must be positive")


def _stack(a, b):
    return np.stack([np.broadcast_to(a, np.shape(a + b)), np.broadcast_to(b, np.shape(a + b))], axis=-1)


def _grad(a11, a12, a21, a22):
    shape = np.broadcast(a11, a12, a21, a22).shape
    out = np.empty(shape + (2, 2))
    out[..., 0, 0] = a11
    out[..., 0, 1] = a12
    out[..., 1, 0] = a21
    out[..., 1, 1] = a22
    return out


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """Exact displacement with matching body force and boundary description.

    Fields are vectorized over coordinate arrays: ``u`` and ``f`` return
    ``(m, 2)``, ``grad_u`` returns ``(m, 2, 2)`` with ``grad[i, j] = du_i/dx_j``
    and ``div_u`` returns ``(m,)``.  ``div_u`` is supplied analytically so the
    stress ``lam * div u`` stays accurate for very large ``lam``.

    ``boundary`` is ``"dirichlet"``, ``"mixed"`` (traction on ``y = 0``) or
    ``"traction"``.
    """

    name: str
    u: Callable
    grad_u: Callable
    div_u: Callable
    f: Callable
    mu: float
    lam: float
    boundary: str = "dirichlet"
    check_points: int = 20
    fields: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lam <= 0 or self.mu <= 0:
            raise ValueError("Lame constants must be positive")
        if self.boundary not in ("dirichlet", "mixed", "traction"):
            raise ValueError(f"unknown boundary kind {self.boundary!r}")
        self.check_consistency()

    def stress(self, x, y) -> np.ndarray:
        g = self.grad_u(x, y)
        d = np.asarray(self.div_u(x, y), dtype=float)
        s = self.mu * (g + np.swapaxes(g, -1, -2))
        s[..., 0, 0] += self.lam * d
        s[..., 1, 1] += self.lam * d
        return s

    def traction(self, x, y, normal) -> np.ndarray:
        return self.stress(x, y) @ np.asarray(normal, dtype=float)

    def check_consistency(self, n_points: int | None = None, seed: int = 12345) -> None:
        """Finite-difference gate on ``grad_u``, ``div_u`` and ``f``."""
        m = n_points or self.check_points
        pts = np.random.default_rng(seed).uniform(0.05, 0.95, size=(m, 2))
        x, y = pts[:, 0], pts[:, 1]
        h = FD_STEP

        g = self.grad_u(x, y)
        g_fd = np.empty_like(g)
        g_fd[:, :, 0] = (self.u(x + h, y) - self.u(x - h, y)) / (2 * h)
        g_fd[:, :, 1] = (self.u(x, y + h) - self.u(x, y - h)) / (2 * h)
        scale = max(1.0, float(np.abs(g).max()))
        if np.abs(g_fd - g).max() > 1e-5 * scale:
            raise CaseConsistencyError(f"{self.name}: grad_u disagrees with finite differences of u")

        tr = g[:, 0, 0] + g[:, 1, 1]
        if np.abs(tr - self.div_u(x, y)).max() > 1e-10 * scale:
            raise CaseConsistencyError(f"{self.name}: div_u disagrees with the trace of grad_u")

        div_fd = np.zeros((m, 2))
        div_fd += (self.stress(x + h, y)[:, :, 0] - self.stress(x - h, y)[:, :, 0]) / (2 * h)
        div_fd += (self.stress(x, y + h)[:, :, 1] - self.stress(x, y - h)[:, :, 1]) / (2 * h)
        f = np.asarray(self.f(x, y), dtype=float)
        fscale = max(1.0, float(np.abs(f).max()))
        if np.abs(-div_fd - f).max() > 1e-5 * fscale:
            raise CaseConsistencyError(f"{self.name}: f is not -div sigma(u)")

    def prepare_mesh(self, mesh: PolygonalMesh) -> PolygonalMesh:
        if self.boundary == "mixed":
            return relabel_boundary(mesh, lambda x, y: abs(y) < 1e-12, 2)
        return mesh

    def boundary_spec(self) -> BoundarySpec:
        if self.boundary == "dirichlet":
            return BoundarySpec(dirichlet={1}, g1=self.u)
        if self.boundary == "mixed":
            return BoundarySpec(dirichlet={1}, g1=self.u, neumann={2}, g2=self.traction)
        return BoundarySpec(neumann={1}, g2=self.traction, pure_traction=True)


def case_patch(lam: float = 1.0, mu: float = 1.0, coeffs=(0.1, 0.2, -0.3, -0.05, 0.15, 0.25)) -> ManufacturedCase:
    """Vector-linear displacement with zero body force."""
    _check_material(lam, mu)
    a0, a1, a2, b0, b1, b2 = coeffs

    def u(x, y):
        return _stack(a0 + a1 * x + a2 * y, b0 + b1 * x + b2 * y)

    def grad_u(x, y):
        z = np.zeros_like(np.asarray(x, dtype=float))
        return _grad(a1 + z, a2 + z, b1 + z, b2 + z)

    def div_u(x, y):
        return np.full(np.shape(x), a1 + b2)

    def f(x, y):
        return np.zeros(np.shape(x) + (2,))

    return ManufacturedCase("patch", u, grad_u, div_u, f, mu, lam)


def case_test1(lam: float, mu: float = 1.0) -> ManufacturedCase:
    """Homogeneous Dirichlet problem with a ``1/(mu + lam)`` compressible part."""
    _check_material(lam, mu)
    k = 1.0 / (mu + lam)

    def u(x, y):
        s = np.sin(PI * x) * np.sin(PI * y)
        return _stack(
            (-1.0 + np.cos(2 * PI * x)) * np.sin(2 * PI * y) + k * s,
            (1.0 - np.cos(2 * PI * y)) * np.sin(2 * PI * x) + k * s,
        )

    def grad_u(x, y):
        cx, sy = np.cos(PI * x), np.sin(PI * y)
        sx, cy = np.sin(PI * x), np.cos(PI * y)
        return _grad(
            -2 * PI * np.sin(2 * PI * x) * np.sin(2 * PI * y) + k * PI * cx * sy,
            2 * PI * (-1.0 + np.cos(2 * PI * x)) * np.cos(2 * PI * y) + k * PI * sx * cy,
            2 * PI * (1.0 - np.cos(2 * PI * y)) * np.cos(2 * PI * x) + k * PI * cx * sy,
            2 * PI * np.sin(2 * PI * x) * np.sin(2 * PI * y) + k * PI * sx * cy,
        )

    def div_u(x, y):
        return k * PI * np.sin(PI * (x + y))

    def f(x, y):
        s = np.sin(PI * x) * np.sin(PI * y)
        common = 2 * PI ** 2 * mu * k * s - PI ** 2 * np.cos(PI * (x + y))
        return _stack(
            4 * PI ** 2 * mu * np.sin(2 * PI * y) * (2 * np.cos(2 * PI * x) - 1.0) + common,
            -4 * PI ** 2 * mu * np.sin(2 * PI * x) * (2 * np.cos(2 * PI * y) - 1.0) + common,
        )

    return ManufacturedCase("test1", u, grad_u, div_u, f, mu, lam)


def case_test2(lam: float, mu: float = 0.5) -> ManufacturedCase:
    """Mixed problem: traction on ``y = 0``, displacement elsewhere, ``div u = 2/lam``."""
    _check_material(lam, mu)
    il = 1.0 / lam

    def u(x, y):
        return _stack(np.sin(x) * np.sin(y) + il * x, np.cos(x) * np.cos(y) + il * y)

    def grad_u(x, y):
        return _grad(
            np.cos(x) * np.sin(y) + il,
            np.sin(x) * np.cos(y),
            -np.sin(x) * np.cos(y),
            -np.cos(x) * np.sin(y) + il,
        )

    def div_u(x, y):
        return np.full(np.shape(x), 2.0 * il)

    def f(x, y):
        return _stack(2 * mu * np.sin(x) * np.sin(y), 2 * mu * np.cos(x) * np.cos(y))

    return ManufacturedCase("test2", u, grad_u, div_u, f, mu, lam, boundary="mixed")


def _test3_fields(mu):
    def u(x, y):
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)
        return _stack(-2 * sx ** 3 * sy ** 2 * cy, 2 * sx ** 2 * cx * sy ** 3)

    def grad_u(x, y):
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)
        shear = 6 * PI * sx ** 2 * cx * sy ** 2 * cy
        return _grad(
            -shear,
            -2 * PI * sx ** 3 * sy * (2 - 3 * sy ** 2),
            2 * PI * sx * (2 - 3 * sx ** 2) * sy ** 3,
            shear,
        )

    def div_u(x, y):
        return np.zeros(np.shape(x))

    def f(x, y):
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)
        lap1 = -2 * PI ** 2 * (3 * sx * (2 - 3 * sx ** 2) * sy ** 2 * cy + sx ** 3 * cy * (2 - 9 * sy ** 2))
        lap2 = 2 * PI ** 2 * (cx * (2 - 9 * sx ** 2) * sy ** 3 + 3 * sx ** 2 * cx * sy * (2 - 3 * sy ** 2))
        return _stack(-mu * lap1, -mu * lap2)

    return u, grad_u, div_u, f


def case_test3(lam: float = 1e10, mu: float = 1.0) -> ManufacturedCase:
    """Divergence-free displacement vanishing on the boundary; ``f`` does not involve ``lam``."""
    _check_material(lam, mu)
    case = ManufacturedCase("test3", *_test3_fields(mu), mu, lam, check_points=50)
    return case


def case_traction(lam: float = 1.0, mu: float = 1.0) -> ManufacturedCase:
    """The test3 field posed with its exact traction on the whole boundary.

    It has zero boundary mean and zero integrated rotation, so it is the
    constrained solution of the pure-traction problem.
    """
    _check_material(lam, mu)
    return ManufacturedCase("traction", *_test3_fields(mu), mu, lam, boundary="traction", check_points=50)


CASES = {
    "patch": case_patch,
    "test1": case_test1,
    "test2": case_test2,
    "test3": case_test3,
    "traction": case_traction,
}

DEFAULT_MU = {"patch": 1.0, "test1": 1.0, "test2": 0.5, "test3": 1.0, "traction": 1.0}


def make_case(name: str, lam: float, mu: float | None = None) -> ManufacturedCase:
    try:
        factory = CASES[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
    return factory(lam=lam, mu=DEFAULT_MU[name] if mu is None else mu)


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    h: float
    dofs: int
    err_h1: float
    err_l2: float
    cell_h1: np.ndarray = field(default=None, repr=False)
    cell_l2: np.ndarray = field(default=None, repr=False)
    failed: bool = False
    message: str = ""

    @classmethod
    def failure(cls, h, dofs, message):
        return cls(h, dofs, math.nan, math.nan, failed=True, message=message)


def projected_coefficients(disc: Discretization, dofs) -> np.ndarray:
    """Scaled-basis coefficients ``(n_cells, 6)`` of the elliptic projection of a DOF vector."""
    dofs = np.asarray(dofs, dtype=float)
    return np.array([p.pi1_coeffs @ dofs[g] for p, g in zip(disc.projections, disc.dofmap.gathers)])


def compute_errors(disc: Discretization, dofs, case: ManufacturedCase, degree: int = 8) -> ErrorReport:
    """L2 and H1-seminorm distance between ``case.u`` and the cellwise projection of ``dofs``."""
    coeffs = projected_coefficients(disc, dofs)
    pts, w, ids = disc.quadrature(degree)
    centroid = np.array([p.geometry.centroid for p in disc.projections])
    diam = np.array([p.geometry.diameter for p in disc.projections])
    s = (pts[:, 0] - centroid[ids, 0]) / diam[ids]
    t = (pts[:, 1] - centroid[ids, 1]) / diam[ids]
    c = coeffs[ids]
    uh = np.column_stack([c[:, 0] + c[:, 1] * s + c[:, 2] * t, c[:, 3] + c[:, 4] * s + c[:, 5] * t])
    grad_h = np.stack([coeffs[:, [1, 2]], coeffs[:, [4, 5]]], axis=1) / diam[:, None, None]

    u = case.u(pts[:, 0], pts[:, 1])
    g = case.grad_u(pts[:, 0], pts[:, 1])
    e_l2 = w * ((u - uh) ** 2).sum(1)
    e_h1 = w * ((g - grad_h[ids]) ** 2).sum((1, 2))
    n_cells = disc.mesh.n_cells
    cell_l2 = np.bincount(ids, e_l2, minlength=n_cells)
    cell_h1 = np.bincount(ids, e_h1, minlength=n_cells)
    h = float(diam.max())
    return ErrorReport(h, disc.n_dofs, float(np.sqrt(cell_h1.sum())), float(np.sqrt(cell_l2.sum())), cell_h1, cell_l2)


def divergence_norm(disc: Discretization, dofs) -> float:
    """L2 norm of the cellwise average divergence."""
    dofs = np.asarray(dofs, dtype=float)
    total = 0.0
    for p, g in zip(disc.projections, disc.dofmap.gathers):
        total += p.geometry.area * float(p.pi0div @ dofs[g]) ** 2
    return math.sqrt(total)


def fit_rate(h, err) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(h) != len(err) or len(h) < 2:
        raise ValueError("need at least two (h, err) pairs")
    if np.any(h <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise ValueError("h and err must be positive and finite")
    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


@dataclass
class ConvergenceTable:
    case: str
    lam: float
    mu: float
    family: str
    reports: list
    label: str = ""

    def _ok(self):
        return [r for r in self.reports if not r.failed]

    def _rate(self, attr):
        ok = self._ok()
        if len(ok) < 2:
            return math.nan
        return fit_rate([r.h for r in ok], [getattr(r, attr) for r in ok])

    @property
    def rate_h1(self) -> float:
        return self._rate("err_h1")

    @property
    def rate_l2(self) -> float:
        return self._rate("err_l2")


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------

def build_mesh(family: str, n: int, seed: int = 0, jitter: float = 0.2, n_lloyd: int = 50) -> PolygonalMesh:
    if family == "tri":
        return generate_triangle_mesh(n, jitter, rng_seed=seed)
    if family == "dquad":
        return generate_distorted_quad_mesh(n)
    if family == "voronoi":
        return generate_voronoi_mesh(n, n_lloyd, rng_seed=seed)
    raise ValueError(f"unknown mesh family {family!r}")


@dataclass
class RunResult:
    case: ManufacturedCase
    disc: Discretization
    solution: Solution
    errors: ErrorReport
    div_norm: float


def discretize(case: ManufacturedCase, mesh: PolygonalMesh, alpha: float = 0.5, split: bool = True) -> Discretization:
    mesh = case.prepare_mesh(mesh)
    if split:
        mesh, _ = split_edges(mesh, alpha)
    return Discretization(mesh)


def solve_case(case: ManufacturedCase, mesh: PolygonalMesh | None = None, alpha: float = 0.5, split: bool = True,
               solver: str = "direct", disc: Discretization | None = None) -> RunResult:
    """Discretize (unless ``disc`` is given), assemble, apply boundary conditions, solve, measure."""
    if disc is None:
        if mesh is None:
            raise ValueError("either mesh or disc is required")
        disc = discretize(case, mesh, alpha, split)
    spec = case.boundary_spec()
    system = assemble(disc, case.mu, case.lam, case.f, spec)
    if spec.pure_traction:
        system = build_traction_system(system)
    else:
        system = apply_dirichlet(system)
    sol = solve(system, method=solver)
    return RunResult(case, disc, sol, compute_errors(disc, sol.dofs, case), divergence_norm(disc, sol.dofs))


def _study_one_lambda(args):
    case_name, lam, mu, family, sizes, alpha, seed, n_lloyd, split, solver = args
    reports = []
    for n in sizes:
        try:
            case = make_case(case_name, lam, mu)
            mesh = build_mesh(family, n, seed, n_lloyd=n_lloyd)
            reports.append(solve_case(case, mesh, alpha, split, solver).errors)
        except Exception as exc:  # partial tables keep a failure marker
            reports.append(ErrorReport.failure(math.nan, 0, f"{type(exc).__name__}: {exc}"))
    case = make_case(case_name, lam, mu)
    label = "" if split else "baseline (unsplit)"
    return ConvergenceTable(case_name, lam, case.mu, family, reports, label)


def run_study(case_name: str, family: str, sizes, lambdas, alpha: float = 0.5, mu: float | None = None,
              seed: int = 0, n_lloyd: int = 50, split: bool = True, solver: str = "direct",
              jobs: int = 1) -> list[ConvergenceTable]:
    """One convergence table per ``lam``; meshes are shared across ``lam`` in serial mode."""
    sizes = list(sizes)
    lambdas = list(lambdas)
    if jobs > 1 and len(lambdas) > 1:
        args = [(case_name, lam, mu, family, sizes, alpha, seed, n_lloyd, split, solver) for lam in lambdas]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_study_one_lambda, args))

    reports = {lam: [] for lam in lambdas}
    for n in sizes:
        try:
            mesh = build_mesh(family, n, seed, n_lloyd=n_lloyd)
            disc = discretize(make_case(case_name, lambdas[0], mu), mesh, alpha, split)
        except Exception as exc:
            for lam in lambdas:
                reports[lam].append(ErrorReport.failure(math.nan, 0, f"{type(exc).__name__}: {exc}"))
            continue
        for lam in lambdas:
            try:
                case = make_case(case_name, lam, mu)
                reports[lam].append(solve_case(case, disc=disc, solver=solver).errors)
            except Exception as exc:
                reports[lam].append(ErrorReport.failure(disc.mesh.h, disc.n_dofs, f"{type(exc).__name__}: {exc}"))
    label = "" if split else "baseline (unsplit)"
    return [
        ConvergenceTable(case_name, lam, make_case(case_name, lam, mu).mu, family, reports[lam], label)
        for lam in lambdas
    ]
