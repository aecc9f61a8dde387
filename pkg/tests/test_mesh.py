import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import L_SHAPE, UNIT_SQUARE, Z_SHAPE, star_polygon
from polyvem.mesh import (
    MeshError,
    MeshFormatError,
    chebyshev_center,
    check_quality,
    distortion_map,
    format_mesh,
    from_cells,
    generate_distorted_quad_mesh,
    generate_triangle_mesh,
    generate_voronoi_mesh,
    mesh_io,
    parse_mesh,
    polygon_diameter,
    signed_area,
    split_edges,
    validate_mesh,
)


def grid_search_radius(coords, spacing):
    """Largest disc inside the kernel, by brute force over a grid of centers.

    For a center c the admissible radius is the minimum signed distance to the
    supporting lines of all edges (negative if c lies behind one of them).
    """
    p = np.asarray(coords, dtype=float)
    q = np.roll(p, -1, axis=0)
    t = q - p
    length = np.hypot(t[:, 0], t[:, 1])
    lo, hi = p.min(0), p.max(0)
    xs = np.arange(lo[0], hi[0] + spacing / 2, spacing)
    ys = np.arange(lo[1], hi[1] + spacing / 2, spacing)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    c = np.column_stack([gx.ravel(), gy.ravel()])
    r = c[:, None, :] - p[None, :, :]
    dist = (t[None, :, 0] * r[:, :, 1] - t[None, :, 1] * r[:, :, 0]) / length[None, :]
    return max(0.0, float(dist.min(axis=1).max()))


# --- generators -------------------------------------------------------------

@pytest.mark.parametrize("n, cells, verts", [(1, 2, 4), (2, 8, 9), (5, 50, 36)])
def test_triangle_mesh_counts(n, cells, verts):
    m = generate_triangle_mesh(n)
    assert (m.n_cells, m.n_vertices) == (cells, verts)


@pytest.mark.parametrize("seed", range(5))
def test_jittered_triangles_positive_and_boundary_fixed(seed):
    m = generate_triangle_mesh(4, jitter=0.2, rng_seed=seed)
    assert np.all(m.areas() > 0)
    validate_mesh(m)
    b = m.vertices[m.boundary_vertices()]
    on_side = np.isclose(b, 0.0) | np.isclose(b, 1.0)
    assert np.all(on_side.any(axis=1))
    assert np.isclose(m.areas().sum(), 1.0, rtol=1e-12)


def test_triangle_mesh_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_triangle_mesh(0)
    with pytest.raises(ValueError):
        generate_triangle_mesh(3, jitter=0.3)


def test_distortion_map_values():
    assert np.allclose(distortion_map(0.5, 0.5), (0.5, 0.5))
    assert np.allclose(distortion_map(0.25, 0.25), (0.35, 0.35), atol=1e-15)
    s = np.linspace(0, 1, 11)
    for xi, zeta in [(s, 0 * s), (s, 0 * s + 1), (0 * s, s), (0 * s + 1, s)]:
        x, y = distortion_map(xi, zeta)
        assert np.allclose(x, xi, atol=1e-15) and np.allclose(y, zeta, atol=1e-15)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_distorted_quads(n):
    m = generate_distorted_quad_mesh(n)
    assert m.n_cells == n * n
    assert all(len(c) == 4 for c in m.cells)
    assert np.all(m.areas() > 0)
    assert np.isclose(m.areas().sum(), 1.0, rtol=1e-12)


def test_voronoi_symmetric_four_seeds():
    seeds = np.array([[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]])
    m = generate_voronoi_mesh(4, n_lloyd=0, seeds=seeds)
    assert m.n_cells == 4
    assert np.allclose(m.areas(), 0.25, atol=1e-14)
    assert all(len(c) == 4 for c in m.cells)


@pytest.mark.parametrize("n_seeds, seed", [(16, 0), (50, 3), (200, 11)])
def test_voronoi_partition_and_validity(n_seeds, seed):
    m = generate_voronoi_mesh(n_seeds, rng_seed=seed)
    validate_mesh(m)
    assert m.n_cells == n_seeds
    assert abs(m.areas().sum() - 1.0) <= 1e-12
    assert check_quality(m).gamma1 > 0


def test_voronoi_deterministic():
    a = format_mesh(generate_voronoi_mesh(64, rng_seed=7))
    b = format_mesh(generate_voronoi_mesh(64, rng_seed=7))
    c = format_mesh(generate_voronoi_mesh(64, rng_seed=8))
    assert a == b
    assert a != c


def test_lloyd_improves_quality_on_average():
    before = [check_quality(generate_voronoi_mesh(64, 0, rng_seed=s)).gamma1 for s in range(4)]
    after = [check_quality(generate_voronoi_mesh(64, 50, rng_seed=s)).gamma1 for s in range(4)]
    assert np.mean(after) >= np.mean(before)


def test_voronoi_duplicate_seeds_are_separated():
    seeds = np.array([[0.3, 0.3], [0.3, 0.3], [0.7, 0.6], [0.2, 0.8], [0.8, 0.2]])
    m = generate_voronoi_mesh(5, n_lloyd=0, seeds=seeds)
    assert m.n_cells == 5
    assert abs(m.areas().sum() - 1.0) <= 1e-12


def test_voronoi_needs_four_seeds():
    with pytest.raises(ValueError):
        generate_voronoi_mesh(3)


# --- splitting --------------------------------------------------------------

def test_split_unit_square_midpoints():
    m = from_cells(UNIT_SQUARE, [[0, 1, 2, 3]])
    r, smap = split_edges(m, 0.5)
    assert len(r.cells[0]) == 8
    inserted = r.vertices[r.cells[0][1::2]]
    assert np.allclose(inserted, [[0.5, 0], [1, 0.5], [0.5, 1], [0, 0.5]])
    assert np.all(smap.origin_vertex[4:] == -1)
    assert len(r.boundary_edges) == 8


def test_split_quarter_along_canonical_edge():
    m = from_cells(UNIT_SQUARE, [[0, 1, 2, 3]])
    r, smap = split_edges(m, 0.25)
    e = next(k for k, (i, j) in enumerate(smap.edges) if (i, j) == (0, 1))
    assert np.allclose(r.vertices[smap.edge_vertex[e]], [0.25, 0.0])


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_split_shared_edges_conform(alpha):
    m = generate_voronoi_mesh(30, rng_seed=2)
    r, smap = split_edges(m, alpha)
    validate_mesh(r)
    assert r.n_vertices == m.n_vertices + len(m.edges())
    assert np.allclose(r.areas(), m.areas(), rtol=1e-13)
    assert np.allclose(r.diameters(), m.diameters(), rtol=1e-13)
    for k in range(m.n_cells):
        assert len(r.cells[k]) == 2 * len(m.cells[k])
    # inserted point distance to the canonical first endpoint is alpha |e|
    v0 = m.vertices
    for e, (i, j) in enumerate(smap.edges):
        length = np.hypot(*(v0[j] - v0[i]))
        d = np.hypot(*(r.vertices[smap.edge_vertex[e]] - v0[i]))
        assert d == pytest.approx(alpha * length, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5])
def test_split_min_vertex_distance_per_edge(alpha):
    m = generate_triangle_mesh(3, 0.1, rng_seed=1)
    r, smap = split_edges(m, alpha)
    v0 = m.vertices
    for e, (i, j) in enumerate(smap.edges):
        length = np.hypot(*(v0[j] - v0[i]))
        p = r.vertices[smap.edge_vertex[e]]
        near = min(np.hypot(*(p - v0[i])), np.hypot(*(p - v0[j])))
        assert near == pytest.approx(min(alpha, 1 - alpha) * length, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
def test_split_rejects_alpha(alpha):
    with pytest.raises(MeshError):
        split_edges(generate_triangle_mesh(1), alpha)


def test_split_keeps_markers():
    m = from_cells(UNIT_SQUARE, [[0, 1, 2, 3]], marker=lambda x, y: 2 if y < 1e-12 else 1)
    r, _ = split_edges(m, 0.5)
    bottom = r.boundary_markers[np.all(np.isclose(r.vertices[r.boundary_edges][:, :, 1], 0.0), axis=1)]
    assert len(bottom) == 2 and np.all(bottom == 2)
    assert np.sum(r.boundary_markers == 2) == 2


# --- quality and the kernel disc --------------------------------------------

@pytest.mark.parametrize("coords, radius, diameter", [
    (UNIT_SQUARE, 0.5, np.sqrt(2)),
    (L_SHAPE, 0.5, 2 * np.sqrt(2)),
])
def test_kernel_radius_known(coords, radius, diameter):
    center, r = chebyshev_center(coords)
    assert r == pytest.approx(radius, abs=1e-9)
    assert polygon_diameter(coords) == pytest.approx(diameter)
    spacing = 0.01
    assert abs(r - grid_search_radius(coords, spacing)) <= 2 * spacing


def test_kernel_lshape_center_in_unit_square():
    center, _ = chebyshev_center(L_SHAPE)
    assert np.all(center >= -1e-9) and np.all(center <= 1 + 1e-9)


def test_non_star_polygon_has_zero_radius():
    assert signed_area(Z_SHAPE) > 0
    center, r = chebyshev_center(Z_SHAPE)
    assert r == 0.0
    assert grid_search_radius(Z_SHAPE, 0.02) == 0.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 9))
def test_kernel_radius_matches_grid_search(seed, n):
    p = star_polygon(np.random.default_rng(seed), n)
    spacing = 0.01
    _, r = chebyshev_center(p)
    assert abs(r - grid_search_radius(p, spacing)) <= 2 * spacing


def test_quality_report_fields():
    rep = check_quality(from_cells(UNIT_SQUARE, [[0, 1, 2, 3]]))
    assert rep.gamma1 == pytest.approx(0.5 / np.sqrt(2), abs=1e-9)
    assert rep.gamma2 == pytest.approx(1 / np.sqrt(2))
    assert rep.h == pytest.approx(np.sqrt(2))
    text = str(rep)
    for key in ("cells:", "h:", "gamma1:", "gamma2:"):
        assert key in text


# --- validation and file format ----------------------------------------------

def test_from_cells_rejects_orientation_clash():
    v = [[0, 0], [1, 0], [1, 1], [0, 1]]
    with pytest.raises(MeshError):
        from_cells(v, [[0, 1, 2], [0, 1, 3]])


def test_validate_rejects_clockwise():
    m = from_cells(UNIT_SQUARE, [[0, 3, 2, 1]])
    with pytest.raises(MeshError, match="counter-clockwise"):
        validate_mesh(m)


def test_round_trip_two_triangles(tmp_path):
    m = generate_triangle_mesh(1)
    path = tmp_path / "m.txt"
    mesh_io(path, "write", m)
    back = mesh_io(path, "read")
    assert back == m


@pytest.mark.parametrize("family", ["tri", "voronoi"])
def test_round_trip_exact_coordinates(family):
    m = generate_triangle_mesh(4, 0.25, rng_seed=3) if family == "tri" else generate_voronoi_mesh(40, rng_seed=5)
    back = parse_mesh(format_mesh(m))
    assert back == m
    assert np.array_equal(back.vertices, m.vertices)


def _two_tri_text():
    return format_mesh(generate_triangle_mesh(1))


def test_file_format_layout():
    lines = _two_tri_text().splitlines()
    assert lines[0] == "polymesh 1"
    assert lines[1] == "4 2 4"
    assert lines[6].split()[0] == "3"


def test_read_rejects_clockwise_cell():
    lines = _two_tri_text().splitlines()
    k, a, b, c = lines[6].split()
    lines[6] = f"{k} {a} {c} {b}"
    with pytest.raises(MeshFormatError, match="cell 0") as exc:
        parse_mesh("\n".join(lines) + "\n")
    assert exc.value.line == 7


def test_read_rejects_dangling_index():
    lines = _two_tri_text().splitlines()
    k, a, b, c = lines[6].split()
    lines[6] = f"{k} {a} {b} 99"
    with pytest.raises(MeshFormatError, match="out of range"):
        parse_mesh("\n".join(lines) + "\n")


@pytest.mark.parametrize("mutate, line", [
    (lambda L: ["polymesh 2"] + L[1:], 1),
    (lambda L: L[:1] + ["4 two 4"] + L[2:], 2),
    (lambda L: L[:2] + ["0.0 nope"] + L[3:], 3),
    (lambda L: L[:-1], None),
    (lambda L: L + ["junk"], None),
])
def test_read_malformed_reports_line(mutate, line):
    lines = mutate(_two_tri_text().splitlines())
    with pytest.raises(MeshFormatError) as exc:
        parse_mesh("\n".join(lines) + "\n")
    if line is not None:
        assert exc.value.line == line
        assert f"line {line}" in str(exc.value)
