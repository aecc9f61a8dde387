"""Quadrature on triangles, polygons (star fans) and segments.

Used for loads, error norms and test oracles only.  The virtual element
operators never integrate over cells; they work from vertex values.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import MeshError, chebyshev_center, polygon_centroid, signed_area

__all__ = [
    "TriangleRule",
    "EdgeRule",
    "triangle_rule",
    "edge_rule",
    "kernel_apex",
    "fan_triangulate",
    "cell_quadrature",
    "integrate_cell",
    "integrate_edge",
    "trapezoid_weights",
    "trapezoid_piecewise_linear",
]

MAX_DEGREE = 30


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric points ``(m, 3)`` and weights summing to one."""

    barycentric: np.ndarray
    weights: np.ndarray
    degree: int


@dataclass(frozen=True)
class EdgeRule:
    """Points and weights on ``[0, 1]``."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> EdgeRule:
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"edge rule degree must be in [0, {MAX_DEGREE}]")
    npts = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(npts)
    return EdgeRule(0.5 * (x + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Collapsed (Duffy) tensor Gauss rule, exact to total degree ``degree``.

    The collapse Jacobian adds one to the degree in the first direction,
    hence ``ceil((degree + 2) / 2)`` points there.
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"triangle rule degree must be in [0, {MAX_DEGREE}]")
    n1 = (degree + 2 + 1) // 2
    n2 = degree // 2 + 1
    a, wa = np.polynomial.legendre.leggauss(n1)
    b, wb = np.polynomial.legendre.leggauss(n2)
    a, wa = 0.5 * (a + 1.0), 0.5 * wa
    b, wb = 0.5 * (b + 1.0), 0.5 * wb
    u, v = np.meshgrid(a, b, indexing="ij")
    wu, wv = np.meshgrid(wa, wb, indexing="ij")
    xi = u.ravel()
    eta = (v * (1.0 - u)).ravel()
    w = (wu * wv * (1.0 - u)).ravel() * 2.0
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return TriangleRule(bary, w, degree)


def _strictly_inside_kernel(coords, point) -> bool:
    p = np.asarray(coords, dtype=float)
    q = np.roll(p, -1, axis=0)
    t = q - p
    r = point - p
    cross = t[:, 0] * r[:, 1] - t[:, 1] * r[:, 0]
    length = np.hypot(t[:, 0], t[:, 1])
    return bool(np.all(cross > 1e-12 * length * np.sqrt(abs(signed_area(p)))))


def kernel_apex(coords) -> np.ndarray:
    """Centroid if it sees every edge, otherwise the kernel Chebyshev center."""
    c = polygon_centroid(coords)
    if _strictly_inside_kernel(coords, c):
        return c
    center, radius = chebyshev_center(coords)
    if center is None or radius <= 0.0:
        raise MeshError("cell is not star-shaped with respect to a disc; no fan apex exists")
    return center


def fan_triangulate(coords, apex=None) -> np.ndarray:
    """Triangles ``(apex, v_i, v_{i+1})`` as an array of shape ``(N, 3, 2)``."""
    p = np.asarray(coords, dtype=float)
    if apex is None:
        apex = kernel_apex(p)
    apex = np.asarray(apex, dtype=float)
    if not _strictly_inside_kernel(p, apex):
        raise MeshError(
            "fan apex lies outside the cell kernel; pass the kernel center "
            "(see polyvem.mesh.chebyshev_center)"
        )
    q = np.roll(p, -1, axis=0)
    return np.stack([np.broadcast_to(apex, p.shape), p, q], axis=1)


def cell_quadrature(coords, degree: int = 8, apex=None) -> tuple[np.ndarray, np.ndarray]:
    """Points ``(m, 2)`` and weights ``(m,)`` for a polygon via its star fan."""
    tris = fan_triangulate(coords, apex)
    rule = triangle_rule(degree)
    pts = np.einsum("qk,tkd->tqd", rule.barycentric, tris).reshape(-1, 2)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    w = (area[:, None] * rule.weights[None, :]).ravel()
    return pts, w


def integrate_cell(f, coords, degree: int = 8, apex=None):
    """Integral of ``f(x, y)`` over the polygon; ``f`` may return ``(m,)`` or ``(m, k)``."""
    pts, w = cell_quadrature(coords, degree, apex)
    vals = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    return np.tensordot(w, vals, axes=(0, 0))


def integrate_edge(f, p0, p1, degree: int = 5):
    """Arclength integral of ``f(x, y)`` along the segment ``p0 -> p1``."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.hypot(*(p1 - p0)))
    if length == 0.0:
        raise ValueError("zero-length edge")
    rule = edge_rule(degree)
    pts = p0[None, :] + rule.points[:, None] * (p1 - p0)[None, :]
    vals = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
    return length * np.tensordot(rule.weights, vals, axes=(0, 0))


def trapezoid_weights(coords) -> np.ndarray:
    """Boundary integral weight of each vertex hat: half the two adjacent edge lengths."""
    p = np.asarray(coords, dtype=float)
    t = np.roll(p, -1, axis=0) - p
    length = np.hypot(t[:, 0], t[:, 1])
    return 0.5 * (length + np.roll(length, 1))


def trapezoid_piecewise_linear(coords, values):
    """Exact boundary integral of a continuous piecewise-linear trace given at the vertices."""
    return np.tensordot(trapezoid_weights(coords), np.asarray(values, dtype=float), axes=(0, 0))
