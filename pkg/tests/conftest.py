import numpy as np
import pytest

from polyvem.mesh import from_cells

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
L_SHAPE = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])
# two opposite notches: the half-planes of the notch walls exclude each other
Z_SHAPE = np.array([
    [0.0, 0.0], [3.0, 0.0], [3.0, 2.0], [1.0, 2.0], [1.0, 2.9],
    [3.0, 2.9], [3.0, 3.0], [0.0, 3.0], [0.0, 1.0], [2.0, 1.0], [2.0, 0.1], [0.0, 0.1],
])


def star_polygon(rng, n, scale=1.0, center=(0.0, 0.0)):
    """Random polygon that is strictly star-shaped about ``center``.

    Angular gaps are kept well below pi and radii in [0.45, 1], so the
    polygon is simple, CCW, and its kernel contains a disc around ``center``.
    """
    gaps = rng.uniform(0.5, 1.5, size=n)
    gaps = 2 * np.pi * gaps / gaps.sum()
    while gaps.max() > 0.9 * np.pi:
        gaps = np.minimum(gaps, 0.9 * np.pi)
        gaps = 2 * np.pi * gaps / gaps.sum()
    theta = rng.uniform(0, 2 * np.pi) + np.concatenate([[0.0], np.cumsum(gaps[:-1])])
    r = rng.uniform(0.45, 1.0, size=n)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return scale * pts + np.asarray(center)


def split_polygon(coords, alpha):
    p = np.asarray(coords, dtype=float)
    q = np.roll(p, -1, axis=0)
    out = np.empty((2 * len(p), 2))
    out[0::2] = p
    out[1::2] = (1 - alpha) * p + alpha * q
    return out


@pytest.fixture
def two_cell_mesh():
    v = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [0.0, 1.0]]
    return from_cells(v, [[0, 1, 4, 5], [1, 2, 3, 4]])


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
