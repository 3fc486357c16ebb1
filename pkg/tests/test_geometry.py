"""Grids, snapping, cell classification and cut-cell reconstruction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostmg import geometry
from ghostmg.geometry import (
    CartesianGrid,
    CheckerboardCellError,
    SnappedNodeField,
    classify_cells,
    cut_fractions,
    domain_catalog,
    domain_names,
    extract_cut_geometry,
    polygon_area,
    snap_nodes,
)


# ---------------------------------------------------------------------------
# Background grid
# ---------------------------------------------------------------------------

def test_grid_basic_quantities():
    grid = CartesianGrid(4, (0.0, 0.0), 1.0)
    assert grid.dim == 2
    assert grid.h == 0.25
    assert grid.nodes_per_side == 5
    assert grid.num_nodes == 25
    assert grid.node_index(2, 3) == 2 + 3 * 5


def test_grid_one_dimensional():
    grid = CartesianGrid(8, (0.0,), 1.0)
    assert grid.dim == 1
    assert grid.num_nodes == 9
    (x,) = grid.node_coordinates()
    np.testing.assert_allclose(x, np.linspace(0.0, 1.0, 9))


def test_grid_coarsen():
    grid = CartesianGrid(8, (-1.0, -1.0), 2.0)
    coarse = grid.coarsen()
    assert coarse.n == 4
    assert coarse.origin == grid.origin
    assert coarse.extent == grid.extent
    with pytest.raises(ValueError):
        CartesianGrid(5, (0.0, 0.0), 1.0).coarsen()


def test_grid_validation():
    with pytest.raises(ValueError):
        CartesianGrid(0, (0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        CartesianGrid(4, (0.0, 0.0), -1.0)


def test_levelset_grid_requires_tiling_spacing():
    ls = domain_catalog("disk")
    grid = ls.grid(0.25)
    assert grid.n == 4
    with pytest.raises(ValueError):
        ls.grid(0.3)


# ---------------------------------------------------------------------------
# Snapping
# ---------------------------------------------------------------------------

def test_snap_zeroes_near_boundary_nodes():
    # Plane x = 0.5 + 1e-3: the five nodes at x = 0.5 sit 1e-3 away, inside
    # the threshold h^1.75 = 0.25^1.75 ~ 0.088, so they snap to exactly 0.
    ls = geometry.LevelSet("plane", (lambda x, y: x - 0.501,),
                           (geometry.DIRICHLET,))
    grid = CartesianGrid(4, (0.0, 0.0), 1.0)
    field = snap_nodes(grid, ls, alpha=1.75)
    assert field.num_snapped == 5
    V = field.values.reshape(5, 5)
    assert np.all(V[:, 2] == 0.0)
    assert np.all(V[:, :2] < 0.0)
    assert np.all(V[:, 3:] > 0.0)


def test_snap_threshold_shrinks_with_alpha():
    # Larger alpha means a smaller threshold h^alpha (h < 1), so snapping
    # can only become rarer.
    ls = domain_catalog("disk")
    grid = ls.grid(1.0 / 32)
    counts = [snap_nodes(grid, ls, alpha=a).num_snapped
              for a in (1.0, 1.75, 2.0, 4.0)]
    assert all(c0 >= c1 for c0, c1 in zip(counts, counts[1:]))
    assert snap_nodes(grid, ls, alpha=4.0).threshold == grid.h ** 4.0


def test_snap_preserves_unsnapped_values():
    ls = domain_catalog("disk")
    grid = ls.grid(1.0 / 8)
    field = snap_nodes(grid, ls, alpha=1.75)
    x, y = grid.node_coordinates()
    raw = ls.evaluate(x, y)
    keep = np.abs(raw) >= field.threshold
    np.testing.assert_array_equal(field.values[keep], raw[keep])


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def half_plane_field(x_cut: float, n: int = 4) -> SnappedNodeField:
    ls = geometry.LevelSet("plane", (lambda x, y: x - x_cut,),
                           (geometry.DIRICHLET,))
    grid = CartesianGrid(n, (0.0, 0.0), 1.0)
    return snap_nodes(grid, ls, alpha=8.0)  # tiny threshold: no snapping


def test_classify_half_plane_counts():
    # Cut line x = 0.55 on a 4x4 grid: columns 0-1 internal, column 2 cut,
    # column 3 external.
    cls = classify_cells(half_plane_field(0.55))
    assert int(cls.internal.sum()) == 8
    assert int(cls.cut.sum()) == 4
    assert int(cls.external.sum()) == 4
    assert np.all(cls.cut[:, 2])
    assert int(cls.active_nodes.sum()) == 20
    assert int(cls.cut_nodes.sum()) == 10


def test_classify_partitions_cells():
    for name in ("disk", "annulus", "flower"):
        ls = domain_catalog(name)
        field = snap_nodes(ls.grid(ls.art_extent / 32), ls, alpha=1.75)
        cls = classify_cells(field)
        total = cls.internal.astype(int) + cls.cut + cls.external
        assert np.all(total == 1)


def single_cell_field(values) -> SnappedNodeField:
    """One unit cell with prescribed corner values, flat order BL BR TL TR."""
    grid = CartesianGrid(1, (0.0, 0.0), 1.0)
    ls = geometry.LevelSet("manual", (lambda x, y: x,), (geometry.DIRICHLET,))
    return SnappedNodeField(grid, ls, np.asarray(values, dtype=float),
                            alpha=8.0, threshold=0.0, num_snapped=0)


def test_classify_snapped_corner_is_internal():
    # Three interior vertices and one snapped zero: the chord has collapsed
    # to a corner, so the cell counts as internal.
    cls = classify_cells(single_cell_field([-1.0, -1.0, -1.0, 0.0]))
    assert int(cls.internal.sum()) == 1
    assert int(cls.cut.sum()) == 0


def test_classify_positive_corner_is_cut():
    cls = classify_cells(single_cell_field([-1.0, -1.0, -1.0, 1.0]))
    assert int(cls.cut.sum()) == 1


def test_classify_all_nonnegative_is_external():
    cls = classify_cells(single_cell_field([0.0, 1.0, 0.0, 2.0]))
    assert int(cls.external.sum()) == 1
    assert int(cls.active_nodes.sum()) == 0


# ---------------------------------------------------------------------------
# Edge crossings
# ---------------------------------------------------------------------------

def test_cut_fraction_values():
    assert cut_fractions(-1.0, 3.0) == 0.25
    assert cut_fractions(-1.0, 0.0) == 1.0
    assert cut_fractions(-2.0, 2.0) == 0.5


def test_cut_fraction_scale_invariance():
    assert cut_fractions(-0.3, 0.7) == cut_fractions(-3.0, 7.0)


def test_cut_fraction_rejects_bad_signs():
    with pytest.raises(ValueError):
        cut_fractions(1.0, 2.0)
    with pytest.raises(ValueError):
        cut_fractions(-1.0, -2.0)
    with pytest.raises(ValueError):
        cut_fractions(0.0, 1.0)


# ---------------------------------------------------------------------------
# Cut-cell reconstruction
# ---------------------------------------------------------------------------

def test_triangle_cut_cell():
    # BL interior; crossings at 0.25 along the bottom edge and 0.5 up the
    # left edge.  Area = (1/2) * 0.25 * 0.5.
    (cut,) = extract_cut_geometry(single_cell_field([-1.0, 3.0, 1.0, 5.0]))
    assert cut.shape == "triangle"
    assert cut.theta == (0.25, 0.5)
    assert polygon_area(cut.polygon) == pytest.approx(0.0625, rel=1e-15)
    np.testing.assert_allclose(
        sorted(cut.chord.tolist()), [[0.0, 0.5], [0.25, 0.0]], atol=1e-15)
    # Outward normal points away from the interior corner.
    assert cut.normal @ np.array([1.0, 1.0]) > 0.0
    assert np.hypot(*cut.normal) == pytest.approx(1.0, rel=1e-15)


def test_quadrilateral_cut_cell():
    # Left half kept; bottom crossing at x = 0.5, top crossing at x = 0.25.
    (cut,) = extract_cut_geometry(single_cell_field([-1.0, 1.0, -1.0, 3.0]))
    assert cut.shape == "quadrilateral"
    assert polygon_area(cut.polygon) == pytest.approx(0.375, rel=1e-14)
    assert cut.normal @ np.array([1.0, 0.0]) > 0.0


def test_pentagon_cut_cell():
    # Only TR exterior; removed corner triangle has legs 0.5 and 0.25.
    (cut,) = extract_cut_geometry(single_cell_field([-1.0, -1.0, -3.0, 1.0]))
    assert cut.shape == "pentagon"
    assert polygon_area(cut.polygon) == pytest.approx(1.0 - 0.0625, rel=1e-14)
    assert len(cut.polygon) == 5


def test_snapped_exterior_gives_full_fraction():
    # BR exactly zero: the crossing sits on the node, theta = 1 on that edge.
    (cut,) = extract_cut_geometry(single_cell_field([-1.0, 0.0, -1.0, 1.0]))
    assert cut.shape == "quadrilateral"
    assert 1.0 in cut.theta


def test_checkerboard_cell_raises():
    with pytest.raises(CheckerboardCellError):
        extract_cut_geometry(single_cell_field([-1.0, 1.0, 1.0, -1.0]))


def test_cut_cells_cover_every_cut_flag():
    ls = domain_catalog("disk")
    field = snap_nodes(ls.grid(1.0 / 16), ls, alpha=1.75)
    cls = classify_cells(field)
    cells = extract_cut_geometry(field, cls)
    assert len(cells) == int(cls.cut.sum())
    flagged = {tuple(c.cell) for c in cells}
    js, is_ = np.nonzero(cls.cut)
    assert flagged == set(zip(is_.tolist(), js.tolist()))


def test_cut_polygon_invariants_on_disk():
    ls = domain_catalog("disk")
    field = snap_nodes(ls.grid(1.0 / 32), ls, alpha=1.75)
    h = field.grid.h
    for cut in extract_cut_geometry(field):
        area = polygon_area(cut.polygon)
        assert 0.0 < area <= h * h + 1e-15
        assert np.hypot(*cut.normal) == pytest.approx(1.0, rel=1e-12)
        # Outward: walking off the chord midpoint along the normal must
        # increase the level set.
        mid = 0.5 * (cut.chord[0] + cut.chord[1])
        step = 1e-6 * h
        ahead = ls.evaluate(mid[0] + step * cut.normal[0],
                            mid[1] + step * cut.normal[1])
        behind = ls.evaluate(mid[0] - step * cut.normal[0],
                             mid[1] - step * cut.normal[1])
        assert ahead > behind


def test_polygonal_disk_area_converges():
    # Internal cells plus cut polygons approximate pi r^2; measured errors
    # on this catalog disk are 2.8e-4 (n=64) and 5.0e-5 (n=128).
    ls = domain_catalog("disk")
    exact = math.pi * 0.4 ** 2
    errors = []
    for n in (64, 128):
        field = snap_nodes(ls.grid(1.0 / n), ls, alpha=1.75)
        cls = classify_cells(field)
        cuts = extract_cut_geometry(field, cls)
        area = (int(cls.internal.sum()) * field.grid.h ** 2
                + sum(polygon_area(c.polygon) for c in cuts))
        errors.append(abs(area - exact))
    assert errors[0] <= 5e-4
    assert errors[1] <= 1e-4


def test_polygon_area_unit_square():
    square = np.array([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)])
    assert polygon_area(square) == pytest.approx(4.0, rel=1e-15)


# ---------------------------------------------------------------------------
# Domain catalog
# ---------------------------------------------------------------------------

def test_domain_names():
    assert domain_names() == ["annulus", "disk", "flower", "hourglass",
                              "leaf", "rectangle"]


def test_unknown_domain_raises():
    with pytest.raises(KeyError):
        domain_catalog("torus")


def test_rectangle_cut_line_from_theta():
    ls = domain_catalog("rectangle", theta=0.3, h=0.125)
    assert ls.params["x_cut"] == pytest.approx(1.0 - 0.7 * 0.125, rel=1e-15)
    assert ls.params["strong_predicate"](0.0, 0.4)
    assert not ls.params["strong_predicate"](0.5, 0.4)


def test_annulus_assigns_bc_by_nearest_component():
    ls = domain_catalog("annulus")
    assert ls.chord_bc(0.5, 0.0) == geometry.DIRICHLET   # inner circle
    assert ls.chord_bc(0.8, 0.0) == geometry.NEUMANN     # outer circle


def test_leaf_assigns_bc_by_predicate():
    ls = domain_catalog("leaf")
    assert ls.chord_bc(0.5, 0.1) == geometry.DIRICHLET
    assert ls.chord_bc(-0.5, 0.1) == geometry.NEUMANN


def test_multi_component_levelset_is_intersection():
    ls = domain_catalog("annulus")
    # Inside the hole, between the circles, and outside.
    assert ls.evaluate(0.0, 0.0) > 0.0
    assert ls.evaluate(0.65, 0.0) < 0.0
    assert ls.evaluate(0.95, 0.0) > 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
def test_random_disks_classify_and_reconstruct(seed):
    """Classification partitions the cells and every reconstructed polygon is
    a nonempty subset of its cell, for random disk positions and sizes."""
    rng = np.random.default_rng(seed)
    n = int(rng.choice([8, 16, 32]))
    cx, cy = rng.uniform(0.35, 0.65, size=2)
    r = float(rng.uniform(0.15, 0.3))
    ls = domain_catalog("disk", center=(cx, cy), radius=r)
    field = snap_nodes(ls.grid(1.0 / n), ls, alpha=1.75)
    cls = classify_cells(field)
    assert np.all(cls.internal.astype(int) + cls.cut + cls.external == 1)
    h = field.grid.h
    for cut in extract_cut_geometry(field, cls):
        area = polygon_area(cut.polygon)
        assert 0.0 < area <= h * h + 1e-15
        i, j = cut.cell
        x0, y0 = field.grid.origin
        assert np.all(cut.polygon[:, 0] >= x0 + i * h - 1e-12)
        assert np.all(cut.polygon[:, 0] <= x0 + (i + 1) * h + 1e-12)
        assert np.all(cut.polygon[:, 1] >= y0 + j * h - 1e-12)
        assert np.all(cut.polygon[:, 1] <= y0 + (j + 1) * h + 1e-12)
