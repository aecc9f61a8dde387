import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import UNIT_SQUARE
from polyvem.assembly import (
    BoundarySpec,
    BoundarySpecError,
    Discretization,
    GlobalSystem,
    SolverError,
    apply_dirichlet,
    assemble,
    build_traction_system,
    constraint_vectors,
    solve,
)
from polyvem.mesh import (
    from_cells,
    generate_distorted_quad_mesh,
    generate_triangle_mesh,
    generate_voronoi_mesh,
    relabel_boundary,
    split_edges,
)
from polyvem.vem_local import build_local_matrices, build_projectors

DIRICHLET = BoundarySpec(dirichlet={1})


def zero_field(x, y):
    return np.zeros((len(x), 2))


def linear_u(x, y):
    return np.column_stack([0.1 + 0.5 * x - 0.3 * y, -0.2 + 0.25 * x + 0.4 * y])


def split(mesh, alpha=0.5):
    return split_edges(mesh, alpha)[0]


MESHES = {
    "tri": lambda: generate_triangle_mesh(4, 0.2, rng_seed=1),
    "dquad": lambda: generate_distorted_quad_mesh(4),
    "voronoi": lambda: generate_voronoi_mesh(25, rng_seed=3),
}


def test_zero_data_gives_zero_solution():
    disc = Discretization(split(generate_triangle_mesh(3)))
    system = assemble(disc, 1.0, 10.0, zero_field, DIRICHLET)
    assert np.all(system.rhs == 0)
    sol = solve(apply_dirichlet(system))
    assert np.all(sol.dofs == 0)


def test_one_cell_kernel_is_rigid_motions():
    mesh = split(from_cells(UNIT_SQUARE, [[0, 1, 2, 3]]))
    a = Discretization(mesh).stiffness(1.0, 5.0).toarray()
    ev = np.linalg.eigvalsh(a)
    assert np.sum(ev < 1e-10 * ev.max()) == 3


def test_two_cell_dense_oracle(two_cell_mesh):
    mesh = split(two_cell_mesh, 0.3)
    mu, lam = 0.7, 3.0
    a = Discretization(mesh).stiffness(mu, lam).toarray()
    nv = mesh.n_vertices
    dense = np.zeros((2 * nv, 2 * nv))
    for cell in mesh.cells:
        local = build_local_matrices(build_projectors(mesh.vertices[cell])).stiffness(mu, lam)
        idx = np.concatenate([cell, cell + nv])
        for i, gi in enumerate(idx):
            for j, gj in enumerate(idx):
                dense[gi, gj] += local[i, j]
    assert np.allclose(a, dense, rtol=0, atol=1e-14 * np.abs(dense).max())


@pytest.mark.parametrize("family", sorted(MESHES))
def test_symmetry_and_nonnegative_form(family):
    disc = Discretization(split(MESHES[family]()))
    system = assemble(disc, 1.0, 1e4, None, DIRICHLET)
    assert system.symmetry_error() <= 1e-13
    rng = np.random.default_rng(0)
    v = rng.normal(size=(disc.n_dofs, 1000))
    q = np.einsum("ij,ij->j", v, system.matrix @ v)
    assert q.min() >= -1e-12 * np.abs(q).max()


def test_global_kernel_dimension():
    mesh = split(generate_voronoi_mesh(6, rng_seed=2))
    a = Discretization(mesh).stiffness(1.0, 1.0).toarray()
    ev = np.linalg.eigvalsh(a)
    assert np.sum(ev < 1e-10 * ev.max()) == 3


def test_eliminated_system_is_spd():
    mesh = split(generate_distorted_quad_mesh(3))
    system = apply_dirichlet(assemble(mesh, 1.0, 1e3, None, DIRICHLET))
    a = system.matrix.toarray()
    assert np.allclose(a, a.T, atol=1e-13 * np.abs(a).max())
    assert np.linalg.eigvalsh(a).min() > 0
    assert np.all(system.matrix.diagonal() > 0)


@pytest.mark.parametrize("family", sorted(MESHES))
@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("lam", [1.0, 1e6])
def test_patch_test(family, alpha, lam):
    mesh = split(MESHES[family](), alpha)
    spec = BoundarySpec(dirichlet={1}, g1=linear_u)
    sol = solve(apply_dirichlet(assemble(mesh, 1.0, lam, zero_field, spec)))
    exact = linear_u(*mesh.vertices.T)
    exact = np.concatenate([exact[:, 0], exact[:, 1]])
    assert np.abs(sol.dofs - exact).max() <= 1e-10 * np.abs(exact).max()


def test_patch_test_cg():
    mesh = split(MESHES["voronoi"](), 0.5)
    spec = BoundarySpec(dirichlet={1}, g1=linear_u)
    sol = solve(apply_dirichlet(assemble(mesh, 1.0, 10.0, zero_field, spec)), method="cg")
    exact = linear_u(*mesh.vertices.T)
    assert np.abs(sol.dofs - np.concatenate([exact[:, 0], exact[:, 1]])).max() <= 1e-10
    assert sol.report.solver == "cg-jacobi"
    assert sol.report.relative_residual <= 1e-12


def test_dirichlet_rows_are_identity():
    mesh = split(generate_triangle_mesh(2))
    system = apply_dirichlet(assemble(mesh, 1.0, 1.0, None, BoundarySpec(dirichlet={1}, g1=linear_u)))
    a = system.matrix.toarray()
    for d in system.constrained:
        row = np.zeros(len(a))
        row[d] = 1.0
        assert np.array_equal(a[d], row) and np.array_equal(a[:, d], row)


def test_neumann_load_constant_traction():
    mesh = relabel_boundary(generate_triangle_mesh(3), lambda x, y: y < 1e-12, 2)
    mesh = split(mesh)
    spec = BoundarySpec(dirichlet={1}, neumann={2}, g2=lambda x, y, n: np.tile([1.0, -2.0], (len(x), 1)))
    system = assemble(mesh, 1.0, 1.0, None, spec)
    nv = mesh.n_vertices
    assert system.rhs[:nv].sum() == pytest.approx(1.0)
    assert system.rhs[nv:].sum() == pytest.approx(-2.0)
    bottom = np.flatnonzero(np.abs(system.rhs[:nv]) > 0)
    assert np.allclose(mesh.vertices[bottom, 1], 0.0)


def test_neumann_normal_is_outward():
    mesh = split(relabel_boundary(generate_triangle_mesh(2), lambda x, y: y < 1e-12, 2))
    seen = []
    spec = BoundarySpec(dirichlet={1}, neumann={2},
                        g2=lambda x, y, n: (seen.append(np.array(n)), np.zeros((len(x), 2)))[1])
    assemble(mesh, 1.0, 1.0, None, spec)
    assert seen and all(np.allclose(n, [0.0, -1.0]) for n in seen)


@pytest.mark.parametrize("spec, match", [
    (BoundarySpec(dirichlet={1}, pure_traction=True), "pure traction"),
    (BoundarySpec(dirichlet={1}, neumann={1}), "two conditions"),
    (BoundarySpec(dirichlet={3}), "no condition"),
    (BoundarySpec(dirichlet={1, 7}), "match no boundary edge"),
    (BoundarySpec(neumann={1}), "pure_traction"),
])
def test_inconsistent_spec_rejected(spec, match):
    with pytest.raises(BoundarySpecError, match=match):
        assemble(split(generate_triangle_mesh(2)), 1.0, 1.0, None, spec)


def test_material_validation():
    with pytest.raises(ValueError):
        assemble(split(generate_triangle_mesh(1)), 0.0, 1.0, None, DIRICHLET)


# --- pure traction -------------------------------------------------------------

TRACTION = BoundarySpec(neumann={1}, pure_traction=True)


def test_traction_zero_data():
    mesh = split(generate_voronoi_mesh(10, rng_seed=0))
    system = build_traction_system(assemble(mesh, 1.0, 1e3, zero_field, TRACTION))
    assert system.kind == "bordered"
    assert system.symmetry_error() <= 1e-13
    sol = solve(system)
    assert np.abs(sol.dofs).max() <= 1e-12
    assert np.abs(sol.multipliers).max() <= 1e-12


def test_constraint_vector_examples():
    mesh = split(generate_triangle_mesh(3, 0.1, rng_seed=2), 0.3)
    d = constraint_vectors(Discretization(mesh))
    nv = mesh.n_vertices
    x, y = mesh.vertices.T
    ident = np.concatenate([x, y])
    assert abs(d[:, 2] @ ident) <= 1e-13
    ex = np.concatenate([np.ones(nv), np.zeros(nv)])
    assert d[:, 0] @ ex == pytest.approx(4.0)
    assert d[:, 1] @ np.concatenate([np.zeros(nv), np.ones(nv)]) == pytest.approx(4.0)
    # rotation field (y, -x): integrated rotation is -2 |Omega|
    assert d[:, 2] @ np.concatenate([y, -x]) == pytest.approx(-2.0)


def test_traction_solution_satisfies_constraints():
    mesh = split(generate_voronoi_mesh(20, rng_seed=1))

    def g2(x, y, n):
        # equilibrated load: uniform tension on all sides
        return np.tile(np.asarray(n, dtype=float), (len(x), 1))

    spec = BoundarySpec(neumann={1}, g2=g2, pure_traction=True)
    system = build_traction_system(assemble(mesh, 1.0, 2.0, None, spec))
    sol = solve(system)
    assert np.abs(system.constraints.T @ sol.dofs).max() <= 1e-12
    # uniform tension: u = c (x - 1/2, y - 1/2) with 2 (mu + lam) c = 1
    x, y = mesh.vertices.T
    c = 1.0 / (2 * (1.0 + 2.0))
    exact = np.concatenate([c * (x - 0.5), c * (y - 0.5)])
    assert np.abs(sol.dofs - exact).max() <= 1e-10
    assert np.abs(sol.multipliers).max() <= 1e-10


def test_incompatible_traction_load_warns():
    mesh = split(generate_triangle_mesh(2))
    system = assemble(mesh, 1.0, 1.0, lambda x, y: np.tile([1.0, 0.0], (len(x), 1)), TRACTION)
    with pytest.warns(RuntimeWarning, match="rigid motions"):
        bordered = build_traction_system(system)
    sol = solve(bordered)
    assert np.all(np.isfinite(sol.dofs))


def test_traction_requires_pure_spec():
    system = assemble(split(generate_triangle_mesh(2)), 1.0, 1.0, None, DIRICHLET)
    with pytest.raises(BoundarySpecError):
        build_traction_system(system)


# --- solver --------------------------------------------------------------------

def _bare(matrix, rhs):
    return GlobalSystem(sp.csr_matrix(matrix), np.asarray(rhs, dtype=float), "spd", None, BoundarySpec())


def test_identity_solve():
    b = np.arange(5.0)
    for method in ("direct", "cg"):
        assert np.allclose(solve(_bare(np.eye(5), b), method=method).dofs, b)


@pytest.mark.parametrize("method", ["direct", "cg"])
def test_random_spd_against_dense(method):
    rng = np.random.default_rng(5)
    m = rng.normal(size=(50, 50))
    a = m @ m.T + 50 * np.eye(50)
    b = rng.normal(size=50)
    x = solve(_bare(a, b), method=method).dofs
    assert np.allclose(x, np.linalg.solve(a, b), atol=1e-10)


def test_cg_failure_reports_history():
    rng = np.random.default_rng(6)
    m = rng.normal(size=(40, 40))
    a = m @ m.T + 1e-3 * np.eye(40)
    with pytest.raises(SolverError) as exc:
        solve(_bare(a, rng.normal(size=40)), method="cg", maxiter=3)
    assert len(exc.value.residuals) == 3


def test_direct_singular_raises():
    with pytest.raises(SolverError):
        solve(_bare(np.zeros((3, 3)), np.ones(3)))


def test_solve_report_text():
    sol = solve(_bare(2 * np.eye(3), np.ones(3)))
    text = str(sol.report)
    for key in ("dofs: 3", "nnz: 3", "solver: direct-lu", "iterations:", "relative_residual:"):
        assert key in text


def test_assembly_is_deterministic():
    mesh = split(generate_voronoi_mesh(30, rng_seed=9), 0.4)
    a = Discretization(mesh).stiffness(1.0, 1e5)
    b = Discretization(mesh).stiffness(1.0, 1e5)
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.data, b.data)


def test_bordered_rejects_cg():
    mesh = split(generate_triangle_mesh(2))
    system = build_traction_system(assemble(mesh, 1.0, 1.0, None, TRACTION))
    with pytest.raises(ValueError):
        solve(system, method="cg")


def test_warning_free_compatible_zero_load():
    mesh = split(generate_triangle_mesh(2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_traction_system(assemble(mesh, 1.0, 1.0, zero_field, TRACTION))
