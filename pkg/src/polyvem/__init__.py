"""Locking-free lowest-order virtual elements for plane elasticity on polygonal meshes."""
from .assembly import BoundarySpec, Discretization, apply_dirichlet, assemble, build_traction_system, solve
from .mesh import (
    PolygonalMesh,
    check_quality,
    generate_distorted_quad_mesh,
    generate_triangle_mesh,
    generate_voronoi_mesh,
    read_mesh,
    split_edges,
    write_mesh,
)
from .verification import compute_errors, fit_rate, make_case, run_study, solve_case

__version__ = "0.1.0"
