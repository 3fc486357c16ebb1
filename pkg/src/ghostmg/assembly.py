"""Bilinear-element assembly of the Nitsche ghost system in 2D.

Every active cell contributes the stiffness of its interior part; cut cells
with a Dirichlet chord additionally contribute the penalty and consistency
chord integrals, and Neumann chords load the right-hand side.  Interior
polygon integrals use a centroid fan triangulation with a degree-2 rule for
stiffness and a degree-4 rule for sources; chord integrals use 3-point Gauss.
All of those are exact for the polynomial integrands at hand (the source rule
is exact through cubics).  Nodes outside every active cell keep identity rows
so the global numbering stays Cartesian.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from ghostmg.geometry import (
    DIRICHLET,
    NEUMANN,
    CartesianGrid,
    CellClassification,
    CutCellGeometry,
    LevelSet,
    SnappedNodeField,
    classify_cells,
    extract_cut_geometry,
    polygon_area,
    snap_nodes,
)


class AssemblyError(Exception):
    """Geometry handed to the assembler is unusable (degenerate polygon or a
    Dirichlet cut cell without a stabilization value)."""


# Corner order BL, BR, TR, TL in local coordinates (xi, eta) in [0, 1]^2.
_CORNERS = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])

_GAUSS_X = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 9.0

# Degree-4 triangle rule (6 points), barycentric coordinates and weights.
_TRI4_A1, _TRI4_W1 = 0.445948490915965, 0.223381589678011
_TRI4_A2, _TRI4_W2 = 0.091576213509771, 0.109951743655322
_TRI4_BARY = np.array([
    (_TRI4_A1, _TRI4_A1, 1.0 - 2.0 * _TRI4_A1),
    (_TRI4_A1, 1.0 - 2.0 * _TRI4_A1, _TRI4_A1),
    (1.0 - 2.0 * _TRI4_A1, _TRI4_A1, _TRI4_A1),
    (_TRI4_A2, _TRI4_A2, 1.0 - 2.0 * _TRI4_A2),
    (_TRI4_A2, 1.0 - 2.0 * _TRI4_A2, _TRI4_A2),
    (1.0 - 2.0 * _TRI4_A2, _TRI4_A2, _TRI4_A2),
])
_TRI4_W = np.array([_TRI4_W1, _TRI4_W1, _TRI4_W1, _TRI4_W2, _TRI4_W2, _TRI4_W2])


def shape_values(xi, eta) -> np.ndarray:
    """The four bilinear shape functions at local (xi, eta); shape (4, ...)."""
    return np.array([
        (1.0 - xi) * (1.0 - eta),
        xi * (1.0 - eta),
        xi * eta,
        (1.0 - xi) * eta,
    ])


def shape_gradients(xi, eta, h: float) -> np.ndarray:
    """Physical gradients of the shape functions; shape (4, 2, ...)."""
    one = np.ones_like(xi)
    dxi = np.array([-(1.0 - eta), (1.0 - eta), eta * one, -eta * one])
    deta = np.array([-(1.0 - xi), -xi * one, xi * one, (1.0 - xi)])
    return np.stack([dxi, deta], axis=1) / h


def full_cell_stiffness() -> np.ndarray:
    """Stiffness of an uncut square cell (h-independent in 2D)."""
    d, e, c = 2.0 / 3.0, -1.0 / 6.0, -1.0 / 3.0
    return np.array([
        [d, e, c, e],
        [e, d, e, c],
        [c, e, d, e],
        [e, c, e, d],
    ])


def _fan_triangles(polygon: np.ndarray):
    """Centroid fan of a convex CCW polygon: yields (v0, v1, v2, area)."""
    centroid = polygon.mean(axis=0)
    m = len(polygon)
    for k in range(m):
        v1 = polygon[k]
        v2 = polygon[(k + 1) % m]
        area = 0.5 * ((v1[0] - centroid[0]) * (v2[1] - centroid[1])
                      - (v2[0] - centroid[0]) * (v1[1] - centroid[1]))
        yield centroid, v1, v2, area


def q1_cell_stiffness(polygon: np.ndarray, h: float,
                      cell_origin: tuple) -> np.ndarray:
    """Stiffness integral of the four shape functions over the polygon.

    Uses the 3-midpoint rule per fan triangle, exact for the quadratic
    integrand grad(N_i) . grad(N_j).
    """
    K = np.zeros((4, 4))
    ox, oy = cell_origin
    for v0, v1, v2, area in _fan_triangles(polygon):
        mids = np.array([0.5 * (v0 + v1), 0.5 * (v1 + v2), 0.5 * (v2 + v0)])
        xi = (mids[:, 0] - ox) / h
        eta = (mids[:, 1] - oy) / h
        G = shape_gradients(xi, eta, h)  # (4, 2, 3)
        w = area / 3.0
        K += w * np.einsum("iaq,jaq->ij", G, G)
    return K


def polygon_source(polygon: np.ndarray, h: float, cell_origin: tuple,
                   f: Callable) -> np.ndarray:
    """Load integral of f against the shape functions over the polygon,
    degree-4 rule per fan triangle."""
    F = np.zeros(4)
    ox, oy = cell_origin
    for v0, v1, v2, area in _fan_triangles(polygon):
        verts = np.array([v0, v1, v2])
        pts = _TRI4_BARY @ verts
        xi = (pts[:, 0] - ox) / h
        eta = (pts[:, 1] - oy) / h
        N = shape_values(xi, eta)  # (4, 6)
        fq = np.asarray(f(pts[:, 0], pts[:, 1]), dtype=float)
        F += area * (N * (_TRI4_W * fq)).sum(axis=1)
    return F


def _chord_quadrature(chord: np.ndarray):
    """3-point Gauss points and weights along a straight chord."""
    mid = 0.5 * (chord[0] + chord[1])
    half = 0.5 * (chord[1] - chord[0])
    length = float(np.hypot(*(chord[1] - chord[0])))
    pts = mid[None, :] + _GAUSS_X[:, None] * half[None, :]
    wts = 0.5 * length * _GAUSS_W
    return pts, wts


def nitsche_chord_terms(chord: np.ndarray, normal: np.ndarray, lam: float,
                        h: float, cell_origin: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Penalty and consistency matrices of a Dirichlet chord.

    Returns (penalty, consistency) with penalty_ij = lam * int N_i N_j dS and
    consistency_ij = int (n . grad N_j) N_i dS; the cell matrix gains
    penalty - consistency - consistency^T.
    """
    pts, wts = _chord_quadrature(chord)
    ox, oy = cell_origin
    xi = (pts[:, 0] - ox) / h
    eta = (pts[:, 1] - oy) / h
    N = shape_values(xi, eta)                      # (4, q)
    G = shape_gradients(xi, eta, h)                # (4, 2, q)
    nd = np.einsum("iaq,a->iq", G, normal)         # (4, q)
    penalty = lam * np.einsum("iq,jq,q->ij", N, N, wts)
    consistency = np.einsum("iq,jq,q->ij", N, nd, wts)
    return penalty, consistency


def chord_normal_gram(chord: np.ndarray, normal: np.ndarray, h: float,
                      cell_origin: tuple) -> np.ndarray:
    """Gram matrix int (n . grad N_i)(n . grad N_j) dS over the chord; the K
    of the local stabilization pencil."""
    pts, wts = _chord_quadrature(chord)
    ox, oy = cell_origin
    xi = (pts[:, 0] - ox) / h
    eta = (pts[:, 1] - oy) / h
    G = shape_gradients(xi, eta, h)
    nd = np.einsum("iaq,a->iq", G, normal)
    return np.einsum("iq,jq,q->ij", nd, nd, wts)


def chord_dirichlet_load(chord: np.ndarray, normal: np.ndarray, lam: float,
                         h: float, cell_origin: tuple, g: Callable) -> np.ndarray:
    """Dirichlet chord load lam * int g N_i - int (n . grad N_i) g."""
    pts, wts = _chord_quadrature(chord)
    ox, oy = cell_origin
    xi = (pts[:, 0] - ox) / h
    eta = (pts[:, 1] - oy) / h
    N = shape_values(xi, eta)
    G = shape_gradients(xi, eta, h)
    nd = np.einsum("iaq,a->iq", G, normal)
    gq = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float)
    return lam * N @ (wts * gq) - nd @ (wts * gq)


def chord_neumann_load(chord: np.ndarray, h: float, cell_origin: tuple,
                       g: Callable) -> np.ndarray:
    """Neumann chord load int g N_i dS."""
    pts, wts = _chord_quadrature(chord)
    ox, oy = cell_origin
    xi = (pts[:, 0] - ox) / h
    eta = (pts[:, 1] - oy) / h
    N = shape_values(xi, eta)
    gq = np.asarray(g(pts[:, 0], pts[:, 1]), dtype=float)
    return N @ (wts * gq)


@dataclass
class ProblemSpec:
    """Continuous problem plus discretization choices.

    Attributes
    ----------
    levelset : LevelSet
        Implicit domain; the grid defaults to the level set's artificial
        domain tiled at spacing h.
    h : float
        Background grid spacing.
    f, g_dirichlet, g_neumann : callable or None
        Source and boundary data, vectorized over (x, y); None means zero.
    gamma : float
        Safety factor: the penalty is lambda_K = gamma * C(K).
    lambda_mode : str
        "local" sizes the penalty per cut cell; "global" uses the max of the
        local constants everywhere.
    stabilization_method : str
        "closed_form" uses the per-shape formulas (eigensolve for
        quadrilaterals); "local_eig" solves the 4x4 pencil on every cut cell.
    alpha : float
        Snapping exponent, threshold h^alpha.
    strong_predicate : callable or None
        Nodes (x, y) on the artificial boundary to constrain strongly.
    """

    levelset: LevelSet
    h: float
    f: Optional[Callable] = None
    g_dirichlet: Optional[Callable] = None
    g_neumann: Optional[Callable] = None
    gamma: float = 2.0
    lambda_mode: str = "local"
    stabilization_method: str = "closed_form"
    alpha: float = 1.75
    strong_predicate: Optional[Callable] = None
    grid: Optional[CartesianGrid] = None


@dataclass
class AssembledSystem:
    """Assembled system A u = F with its geometry and DOF bookkeeping."""

    problem: ProblemSpec
    grid: CartesianGrid
    field: SnappedNodeField
    classification: CellClassification
    cut_cells: list
    stabilization: "object"
    A: sp.csr_matrix
    F: np.ndarray
    active_dofs: np.ndarray
    strong_dofs: np.ndarray
    cut_dofs: np.ndarray

    @property
    def free_dofs(self) -> np.ndarray:
        return self.active_dofs & ~self.strong_dofs


def apply_strong_dirichlet(A: sp.csr_matrix, F: np.ndarray,
                           strong: np.ndarray, g: np.ndarray
                           ) -> tuple[sp.csr_matrix, np.ndarray]:
    """Eliminate strongly constrained DOFs symmetrically.

    Constrained rows and columns become identity with the boundary value on
    the right-hand side; the eliminated column contributions move to the
    right-hand side of the free rows, so symmetry is preserved.
    """
    strong = np.asarray(strong, dtype=bool)
    g_vec = np.zeros(A.shape[0])
    g_vec[strong] = np.asarray(g)[strong] if np.ndim(g) else g
    F_out = F - A @ g_vec
    keep = sp.diags((~strong).astype(float))
    A_out = (keep @ A @ keep + sp.diags(strong.astype(float))).tocsr()
    A_out.eliminate_zeros()
    A_out.sum_duplicates()
    A_out.sort_indices()
    F_out[strong] = g_vec[strong]
    return A_out, F_out


def residual(system: AssembledSystem, u: np.ndarray) -> np.ndarray:
    """F - A u with zeros at inactive and strongly constrained DOFs."""
    r = system.F - system.A @ u
    r[~system.free_dofs] = 0.0
    return r


def assemble(problem: ProblemSpec) -> AssembledSystem:
    """Snap, classify, extract cut geometry, size the penalties and build the
    global system."""
    from ghostmg.stabilization import build_stabilization

    levelset = problem.levelset
    grid = problem.grid if problem.grid is not None else levelset.grid(problem.h)
    h = grid.h
    field = snap_nodes(grid, levelset, problem.alpha)
    classification = classify_cells(field)
    cut_cells = extract_cut_geometry(field, classification)
    stabilization = build_stabilization(
        cut_cells, grid, gamma=problem.gamma, mode=problem.lambda_mode,
        method=problem.stabilization_method,
    )

    nps = grid.nodes_per_side
    num_nodes = grid.num_nodes
    x0, y0 = grid.origin
    rows_acc: list[np.ndarray] = []
    cols_acc: list[np.ndarray] = []
    vals_acc: list[np.ndarray] = []
    F = np.zeros(num_nodes)

    # Internal cells all share the reference stiffness.
    in_js, in_is = np.nonzero(classification.internal)
    if in_is.size:
        base = in_is + in_js * nps
        nodes = np.stack([base, base + 1, base + nps + 1, base + nps], axis=1)
        rows_acc.append(np.repeat(nodes, 4, axis=1).ravel())
        cols_acc.append(np.tile(nodes, (1, 4)).ravel())
        vals_acc.append(np.tile(full_cell_stiffness().ravel(), in_is.size))
        if problem.f is not None:
            F += _internal_source(problem.f, grid, in_is, in_js, nodes)

    area_floor = 1e-14 * h * h
    for cut in cut_cells:
        i, j = cut.cell
        origin = (x0 + i * h, y0 + j * h)
        area = polygon_area(cut.polygon)
        if area < area_floor:
            raise AssemblyError(
                f"cut cell {cut.cell} has degenerate interior polygon "
                f"(area {area:.3e} < {area_floor:.3e})"
            )
        K = q1_cell_stiffness(cut.polygon, h, origin)
        if cut.bc == DIRICHLET:
            lam = stabilization.lam.get(cut.cell)
            if lam is None or not lam > 0.0:
                raise AssemblyError(
                    f"Dirichlet cut cell {cut.cell} lacks a positive penalty"
                )
            penalty, consistency = nitsche_chord_terms(
                cut.chord, cut.normal, lam, h, origin)
            K = K + penalty - consistency - consistency.T
            # Entries (i, j) and (j, i) accumulate the same three terms in
            # different orders, so they can drift apart by one ulp; average
            # the halves to keep the assembled operator bitwise symmetric.
            K = 0.5 * (K + K.T)
            if problem.g_dirichlet is not None:
                F[cut.nodes] += chord_dirichlet_load(
                    cut.chord, cut.normal, lam, h, origin, problem.g_dirichlet)
        elif cut.bc == NEUMANN:
            if problem.g_neumann is not None:
                F[cut.nodes] += chord_neumann_load(
                    cut.chord, h, origin, problem.g_neumann)
        else:
            raise AssemblyError(f"cut cell {cut.cell} has unknown bc {cut.bc!r}")
        if problem.f is not None:
            F[cut.nodes] += polygon_source(cut.polygon, h, origin, problem.f)
        rows_acc.append(np.repeat(cut.nodes, 4))
        cols_acc.append(np.tile(cut.nodes, 4))
        vals_acc.append(K.ravel())

    active = classification.active_nodes
    inactive_idx = np.flatnonzero(~active)
    if inactive_idx.size:
        rows_acc.append(inactive_idx)
        cols_acc.append(inactive_idx)
        vals_acc.append(np.ones(inactive_idx.size))

    A = sp.csr_matrix(
        (np.concatenate(vals_acc),
         (np.concatenate(rows_acc), np.concatenate(cols_acc))),
        shape=(num_nodes, num_nodes),
    )
    A.sum_duplicates()
    A.sort_indices()
    F[~active] = 0.0

    strong = np.zeros(num_nodes, dtype=bool)
    if problem.strong_predicate is not None:
        X, Y = grid.node_coordinates()
        pred = problem.strong_predicate
        strong = np.array([pred(x, y) for x, y in zip(X, Y)], dtype=bool) & active
        if np.any(strong):
            if problem.g_dirichlet is not None:
                g_vals = np.asarray(problem.g_dirichlet(X, Y), dtype=float)
            else:
                g_vals = np.zeros(num_nodes)
            A, F = apply_strong_dirichlet(A, F, strong, g_vals)

    return AssembledSystem(
        problem=problem,
        grid=grid,
        field=field,
        classification=classification,
        cut_cells=cut_cells,
        stabilization=stabilization,
        A=A,
        F=F,
        active_dofs=active,
        strong_dofs=strong,
        cut_dofs=classification.cut_nodes & active & ~strong,
    )


def _internal_source(f: Callable, grid: CartesianGrid, in_is: np.ndarray,
                     in_js: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Vectorized load integral over all internal cells, 3x3 tensor Gauss."""
    h = grid.h
    x0, y0 = grid.origin
    xi_1d = 0.5 + 0.5 * _GAUSS_X
    w_1d = 0.5 * _GAUSS_W
    XI, ETA = np.meshgrid(xi_1d, xi_1d, indexing="ij")
    xi_q = XI.ravel()
    eta_q = ETA.ravel()
    w_q = np.outer(w_1d, w_1d).ravel() * h * h
    N = shape_values(xi_q, eta_q)  # (4, 9)
    cx = x0 + in_is * h
    cy = y0 + in_js * h
    xq = cx[:, None] + xi_q[None, :] * h   # (cells, 9)
    yq = cy[:, None] + eta_q[None, :] * h
    fq = np.asarray(f(xq, yq), dtype=float)
    loads = (fq * w_q[None, :]) @ N.T      # (cells, 4)
    F = np.zeros(grid.num_nodes)
    np.add.at(F, nodes, loads)
    return F
