"""Background grids, level sets, snapping and cut-cell geometry.

The computational domain is the negative region of a level-set function
sampled at the nodes of a uniform Cartesian grid.  Nodal values close to zero
are snapped to exactly zero, cells are classified internal / cut / external
from the vertex signs, and each cut cell yields an interior polygon plus a
straight boundary chord between the two edge crossings.

Conventions
-----------
* Node (i, j) sits at (x0 + i h, y0 + j h); the flat node index is
  k = i + j (n + 1).
* A vertex is interior when its snapped value is strictly negative; a snapped
  zero sits on the boundary.  Cells whose boundary chord would degenerate to
  a point (three negative vertices, fourth exactly zero) count as internal so
  no zero-measure cut geometry is ever produced.
* Cut-cell polygons are counterclockwise; the chord is the polygon edge that
  crosses the cell, and its outward unit normal points into the positive
  region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


class CheckerboardCellError(Exception):
    """A cut cell has its two interior vertices on a diagonal, so the linear
    chord reconstruction is ambiguous.  These configurations are rejected."""


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform square background grid with n cells per side.

    Attributes
    ----------
    n : int
        Cells per side; multigrid hierarchies additionally require a power of
        two.
    origin : tuple of float
        Coordinates of the lower-left node of the artificial domain.
    extent : float
        Side length of the artificial domain, so h = extent / n.
    """

    n: int
    origin: tuple
    extent: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid needs at least one cell")
        if self.extent <= 0.0:
            raise ValueError("grid extent must be positive")

    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def h(self) -> float:
        return self.extent / self.n

    @property
    def nodes_per_side(self) -> int:
        return self.n + 1

    @property
    def num_nodes(self) -> int:
        return self.nodes_per_side ** self.dim

    def node_coordinates(self) -> tuple[np.ndarray, ...]:
        """Nodal coordinate arrays, flattened in node-index order."""
        side = self.origin[0] + self.h * np.arange(self.nodes_per_side)
        if self.dim == 1:
            return (side,)
        ys = self.origin[1] + self.h * np.arange(self.nodes_per_side)
        X, Y = np.meshgrid(side, ys, indexing="xy")
        return X.ravel(), Y.ravel()

    def node_index(self, i: int, j: int = 0) -> int:
        return i + j * self.nodes_per_side

    def coarsen(self) -> "CartesianGrid":
        if self.n % 2 != 0:
            raise ValueError(f"cannot coarsen a grid with odd n = {self.n}")
        return CartesianGrid(self.n // 2, self.origin, self.extent)


@dataclass(frozen=True)
class LevelSet:
    """Implicit domain description: the domain is where the level set is
    negative; the zero set approximates the boundary.

    Multi-component level sets combine as a pointwise max, so the domain is
    the intersection of the component domains.  Boundary-condition assignment
    for a chord uses `bc_predicate` when given (True means Dirichlet),
    otherwise the tag of the component that is active (closest to zero) at
    the chord midpoint.
    """

    name: str
    components: tuple
    bc_tags: tuple
    bc_predicate: Optional[Callable[[float, float], bool]] = None
    params: dict = field(default_factory=dict)
    art_origin: tuple = (0.0, 0.0)
    art_extent: float = 1.0

    def evaluate(self, x, y):
        """Level-set values, the max over components."""
        vals = self.components[0](x, y)
        for comp in self.components[1:]:
            vals = np.maximum(vals, comp(x, y))
        return vals

    def chord_bc(self, x: float, y: float) -> str:
        """Boundary-condition tag for a chord through (x, y)."""
        if self.bc_predicate is not None:
            return DIRICHLET if self.bc_predicate(x, y) else NEUMANN
        if len(self.components) == 1:
            return self.bc_tags[0]
        vals = [abs(float(comp(x, y))) for comp in self.components]
        return self.bc_tags[int(np.argmin(vals))]

    def grid(self, h: float) -> CartesianGrid:
        """Background grid of spacing h covering the artificial domain."""
        n = self.art_extent / h
        n_int = int(round(n))
        if abs(n - n_int) > 1e-12 or n_int < 1:
            raise ValueError(f"h = {h} does not tile extent {self.art_extent}")
        return CartesianGrid(n_int, self.art_origin, self.art_extent)


@dataclass
class SnappedNodeField:
    """Nodal level-set values after snapping |psi| < h^alpha to exactly 0."""

    grid: CartesianGrid
    levelset: LevelSet
    values: np.ndarray
    alpha: float
    threshold: float
    num_snapped: int


@dataclass
class CellClassification:
    """Vertex-sign classification of every background cell.

    Boolean masks are (n, n) arrays indexed [j, i] (row = y).  Node masks are
    flat over the (n+1)^2 nodes.
    """

    grid: CartesianGrid
    internal: np.ndarray
    cut: np.ndarray
    external: np.ndarray
    active_nodes: np.ndarray
    cut_nodes: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return self.internal | self.cut


@dataclass
class CutCellGeometry:
    """Linear reconstruction of one cut cell.

    Attributes
    ----------
    cell : (i, j)
        Cell indices.
    shape : str
        "triangle", "quadrilateral" or "pentagon" by the count of interior
        vertices (1, 2, 3).
    theta : (float, float)
        Crossing fractions, measured along each crossed edge from its
        interior endpoint, in cell-walk order.
    polygon : ndarray, shape (m, 2)
        Interior polygon, counterclockwise, physical coordinates.
    chord : ndarray, shape (2, 2)
        Endpoints of the boundary chord (an edge of the polygon).
    normal : ndarray, shape (2,)
        Outward unit normal of the chord (pointing into psi > 0).
    bc : str
        "dirichlet" or "neumann" for this chord.
    nodes : ndarray, shape (4,)
        Global node indices of the cell corners (BL, BR, TR, TL).
    """

    cell: tuple
    shape: str
    theta: tuple
    polygon: np.ndarray
    chord: np.ndarray
    normal: np.ndarray
    bc: str
    nodes: np.ndarray


def snap_nodes(grid: CartesianGrid, levelset: LevelSet, alpha: float) -> SnappedNodeField:
    """Evaluate the level set at the nodes and snap near-zero values to 0.

    Every node with |psi| < h^alpha stores exactly 0, which removes the
    smallest cut fractions; alpha = 2 is used in 1D studies and alpha = 1.75
    in 2D.
    """
    coords = grid.node_coordinates()
    if grid.dim == 1:
        values = np.asarray(levelset.evaluate(coords[0], np.zeros_like(coords[0])), dtype=float)
    else:
        values = np.asarray(levelset.evaluate(coords[0], coords[1]), dtype=float)
    threshold = grid.h ** alpha
    snapped = np.abs(values) < threshold
    values = values.copy()
    values[snapped] = 0.0
    return SnappedNodeField(grid, levelset, values, alpha, threshold,
                            int(np.count_nonzero(snapped)))


def classify_cells(field: SnappedNodeField) -> CellClassification:
    """Classify every cell from the signs of its snapped vertex values.

    A vertex is interior iff its value is strictly negative.  With n_neg the
    count of interior vertices and n_pos the count of strictly positive ones:
    external has n_neg == 0; internal has n_neg == 4, or n_neg == 3 with
    n_pos == 0 (chord collapsed to one corner, zero boundary measure);
    everything else is cut.
    """
    grid = field.grid
    n = grid.n
    V = field.values.reshape(grid.nodes_per_side, grid.nodes_per_side)
    neg = V < 0.0
    pos = V > 0.0
    n_neg = (neg[:-1, :-1].astype(np.int8) + neg[:-1, 1:] + neg[1:, :-1] + neg[1:, 1:])
    n_pos = (pos[:-1, :-1].astype(np.int8) + pos[:-1, 1:] + pos[1:, :-1] + pos[1:, 1:])
    external = n_neg == 0
    internal = (n_neg == 4) | ((n_neg == 3) & (n_pos == 0))
    cut = ~(external | internal)

    def nodes_of(cell_mask: np.ndarray) -> np.ndarray:
        m = np.zeros((grid.nodes_per_side, grid.nodes_per_side), dtype=bool)
        m[:-1, :-1] |= cell_mask
        m[:-1, 1:] |= cell_mask
        m[1:, :-1] |= cell_mask
        m[1:, 1:] |= cell_mask
        return m.ravel()

    return CellClassification(
        grid=grid,
        internal=internal,
        cut=cut,
        external=external,
        active_nodes=nodes_of(internal | cut),
        cut_nodes=nodes_of(cut),
    )


def cut_fractions(psi_a: float, psi_b: float) -> float:
    """Fraction of the edge from vertex a to the boundary crossing.

    Requires psi_a < 0 <= psi_b: the crossing sits at distance theta * |edge|
    from the interior vertex, theta = psi_a / (psi_a - psi_b) in (0, 1], with
    theta == 1 exactly when the exterior value is a snapped zero.
    """
    if not (psi_a < 0.0 <= psi_b):
        raise ValueError(f"need psi_a < 0 <= psi_b, got ({psi_a}, {psi_b})")
    return psi_a / (psi_a - psi_b)


_SHAPE_BY_NEG = {1: "triangle", 2: "quadrilateral", 3: "pentagon"}


def extract_cut_geometry(field: SnappedNodeField,
                         classification: Optional[CellClassification] = None
                         ) -> list[CutCellGeometry]:
    """Interior polygon, chord, normal and bc tag for every cut cell.

    Walks each cut cell's corners counterclockwise, keeping interior corners
    and inserting the two edge crossings; the polygon edge between the
    crossings is the boundary chord.  Cells whose two interior vertices lie
    on a diagonal are rejected (CheckerboardCellError).
    """
    if classification is None:
        classification = classify_cells(field)
    grid = field.grid
    n = grid.n
    nps = grid.nodes_per_side
    h = grid.h
    V = field.values.reshape(nps, nps)
    x0, y0 = grid.origin
    cut_js, cut_is = np.nonzero(classification.cut)
    cells: list[CutCellGeometry] = []
    for j, i in zip(cut_js.tolist(), cut_is.tolist()):
        # Corner order BL, BR, TR, TL is counterclockwise.
        corner_idx = ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))
        psi = [V[cj, ci] for ci, cj in corner_idx]
        xy = [np.array((x0 + ci * h, y0 + cj * h)) for ci, cj in corner_idx]
        neg = [p < 0.0 for p in psi]
        n_neg = sum(neg)
        if n_neg == 2 and neg[0] == neg[2]:
            raise CheckerboardCellError(
                f"cell {(i, j)}: interior vertices on a diagonal; "
                "refine the grid or adjust the level set"
            )
        polygon: list[np.ndarray] = []
        crossings: list[int] = []  # positions of crossing points in `polygon`
        thetas: list[float] = []
        for k in range(4):
            a, b = k, (k + 1) % 4
            if neg[a]:
                polygon.append(xy[a])
            if neg[a] != neg[b]:
                if neg[a]:
                    theta = cut_fractions(psi[a], psi[b])
                    point = xy[a] + theta * (xy[b] - xy[a])
                else:
                    theta = cut_fractions(psi[b], psi[a])
                    point = xy[b] + theta * (xy[a] - xy[b])
                crossings.append(len(polygon))
                thetas.append(theta)
                polygon.append(point)
        if len(crossings) != 2:
            raise CheckerboardCellError(
                f"cell {(i, j)}: expected 2 edge crossings, found {len(crossings)}"
            )
        poly = np.array(polygon)
        # The chord runs from the first crossing reached after the last
        # interior corner ("exit") to the next crossing ("entry"); in the
        # counterclockwise walk these are adjacent polygon vertices.
        c0, c1 = crossings
        if (c0 + 1) % len(poly) == c1:
            chord = np.array([poly[c0], poly[c1]])
        else:
            chord = np.array([poly[c1], poly[c0]])
        t = chord[1] - chord[0]
        length = math.hypot(t[0], t[1])
        if length == 0.0:
            raise CheckerboardCellError(
                f"cell {(i, j)}: degenerate zero-length chord"
            )
        normal = np.array((t[1], -t[0])) / length
        mid = 0.5 * (chord[0] + chord[1])
        nodes = np.array([grid.node_index(ci, cj) for ci, cj in corner_idx])
        cells.append(CutCellGeometry(
            cell=(i, j),
            shape=_SHAPE_BY_NEG[n_neg],
            theta=tuple(thetas),
            polygon=poly,
            chord=chord,
            normal=normal,
            bc=field.levelset.chord_bc(mid[0], mid[1]),
            nodes=nodes,
        ))
    return cells


def polygon_area(polygon: np.ndarray) -> float:
    """Shoelace area of a counterclockwise polygon."""
    x = polygon[:, 0]
    y = polygon[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# ---------------------------------------------------------------------------
# Benchmark domain catalog
# ---------------------------------------------------------------------------

def _disk(params: dict) -> LevelSet:
    cx, cy = params.get("center", (0.5, 0.5))
    r = params.get("radius", 0.4)

    def psi(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 - r ** 2

    return LevelSet("disk", (psi,), (DIRICHLET,),
                    params={"center": (cx, cy), "radius": r},
                    art_origin=(0.0, 0.0), art_extent=1.0)


def _annulus(params: dict) -> LevelSet:
    cx, cy = params.get("center", (0.0, 0.0))
    r1 = params.get("r1", 0.5)
    r2 = params.get("r2", 0.8)

    def inner(x, y):
        return r1 ** 2 - (x - cx) ** 2 - (y - cy) ** 2

    def outer(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 - r2 ** 2

    return LevelSet("annulus", (inner, outer), (DIRICHLET, NEUMANN),
                    params={"center": (cx, cy), "r1": r1, "r2": r2},
                    art_origin=(-1.0, -1.0), art_extent=2.0)


_FLOWER_X0 = 0.03 * math.sqrt(3.0)
_FLOWER_Y0 = 0.04 * math.sqrt(2.0)


def _flower(params: dict) -> LevelSet:
    r0 = params.get("radius", 0.52)

    def psi(x, y):
        X = x - _FLOWER_X0
        Y = y - _FLOWER_Y0
        R = np.sqrt(X ** 2 + Y ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            pert = (Y ** 5 + 5.0 * X ** 4 * Y - 10.0 * X ** 2 * Y ** 3) / (5.0 * R ** 5)
        pert = np.where(R > 0.0, pert, 0.0)
        return R - r0 - pert

    return LevelSet("flower", (psi,), (DIRICHLET,), params={"radius": r0},
                    art_origin=(-1.0, -1.0), art_extent=2.0)


def _leaf(params: dict) -> LevelSet:
    r = params.get("radius", 0.7)
    x1 = -0.25 * math.cos(math.pi / 4.0)
    x2 = 0.25 * math.sin(math.pi / 4.0)

    def left(x, y):
        return np.sqrt((x - x1) ** 2 + y ** 2) - r

    def right(x, y):
        return np.sqrt((x - x2) ** 2 + y ** 2) - r

    return LevelSet("leaf", (left, right), (DIRICHLET, DIRICHLET),
                    bc_predicate=lambda x, y: x >= 0.0,
                    params={"radius": r, "centers": (x1, x2)},
                    art_origin=(-1.0, -1.0), art_extent=2.0)


def _hourglass(params: dict) -> LevelSet:
    def psi(x, y):
        X = x - _FLOWER_X0
        Y = y - _FLOWER_Y0
        return 256.0 * Y ** 4 - 16.0 * X ** 4 - 128.0 * Y ** 2 + 36.0 * X ** 2

    return LevelSet("hourglass", (psi,), (DIRICHLET,), params={},
                    art_origin=(-1.0, -1.0), art_extent=2.0)


def _rectangle(params: dict) -> LevelSet:
    if "x_cut" in params:
        x_cut = params["x_cut"]
    else:
        theta = params["theta"]
        h = params["h"]
        x_cut = 1.0 - (1.0 - theta) * h

    def psi(x, y):
        return x - x_cut + 0.0 * y

    def strong(x, y):
        return x == 0.0 or y == 0.0 or y == 1.0

    return LevelSet("rectangle", (psi,), (DIRICHLET,),
                    params={"x_cut": x_cut, "strong_predicate": strong},
                    art_origin=(0.0, 0.0), art_extent=1.0)


_CATALOG = {
    "disk": _disk,
    "annulus": _annulus,
    "flower": _flower,
    "leaf": _leaf,
    "hourglass": _hourglass,
    "rectangle": _rectangle,
}


def domain_names() -> list[str]:
    return sorted(_CATALOG)


def domain_catalog(name: str, **params) -> LevelSet:
    """Construct a benchmark domain by name.

    Names: disk, annulus, flower, leaf, hourglass, rectangle.  The rectangle
    takes either x_cut directly or theta and h (cut line at 1 - (1-theta) h)
    and carries a strong-Dirichlet predicate for the grid-aligned edges in
    its params.
    """
    try:
        builder = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown domain {name!r}; available: {domain_names()}") from None
    return builder(params)
