"""Grid-transfer operators, level hierarchies, smoothing and cycles.

Restriction rows carry the shape-function refinement weights (1/2, 1, 1/2)
in 1D and their tensor product in 2D, and prolongation is exactly the
transpose.  A hierarchy masks the transfers so constrained fine DOFs (ghost
exterior nodes, strongly eliminated nodes) contribute nothing: the masked
restriction has zero columns there, coarse operators are Galerkin triple
products, and coarse DOFs left with no free support become identity rows.
Smoothing is lexicographic Gauss-Seidel (or weighted Jacobi) restricted to
free DOFs, optionally followed by extra sweeps on the cut-cell DOFs only,
and the coarsest level is solved exactly.

The number of levels is set by ``coarsest_n``: coarsening halves n until it
reaches that size, so the finest n must equal ``coarsest_n * 2**L`` for some
L >= 1.  A two-grid method is a hierarchy built with ``coarsest_n = n // 2``;
deeper hierarchies run V- or W-cycles depending on ``gamma_star``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ghostmg.assembly import AssembledSystem
from ghostmg.geometry import CartesianGrid, classify_cells, snap_nodes
from ghostmg.linalg import NotSPDError, canonical_csr, rap_product
from ghostmg.one_dim import OneDimSystem, split_residual_coarse

_SMOOTHERS = ("gauss_seidel", "weighted_jacobi")

#: Number of consecutive growing-residual cycles before a run is flagged.
DIVERGENCE_PATIENCE = 5


@dataclass(frozen=True)
class TransferOperators:
    """A restriction matrix and its exact-transpose prolongation."""

    R: sp.csr_matrix
    P: sp.csr_matrix


def restriction_1d(n: int) -> sp.csr_matrix:
    """Restriction from n+1 fine nodes to n/2 + 1 coarse nodes.

    Row I holds weight 1 at fine node 2I and 1/2 at its fine neighbours, the
    coefficients of the coarse hat function in the fine basis; boundary rows
    lose the outside neighbour.
    """
    if n % 2 != 0 or n < 2:
        raise ValueError(f"need an even number of cells >= 2, got {n}")
    nc = n // 2
    rows, cols, vals = [], [], []
    for I in range(nc + 1):
        center = 2 * I
        rows.append(I)
        cols.append(center)
        vals.append(1.0)
        for neighbor in (center - 1, center + 1):
            if 0 <= neighbor <= n:
                rows.append(I)
                cols.append(neighbor)
                vals.append(0.5)
    R = sp.csr_matrix((vals, (rows, cols)), shape=(nc + 1, n + 1))
    return canonical_csr(R)


def restriction_2d(n: int) -> sp.csr_matrix:
    """Tensor-product restriction for the flat node index k = i + j (n + 1)."""
    R1 = restriction_1d(n)
    return canonical_csr(sp.kron(R1, R1, format="csr"))


def build_restriction(fine_grid: CartesianGrid,
                      coarse_grid: CartesianGrid) -> TransferOperators:
    """Transfer operators between two nested grids (coarse n = fine n / 2)."""
    if fine_grid.dim != coarse_grid.dim:
        raise ValueError(
            f"grid dimensions differ: {fine_grid.dim} vs {coarse_grid.dim}")
    if fine_grid.n != 2 * coarse_grid.n:
        raise ValueError(
            f"coarse grid must halve the fine one: fine n = {fine_grid.n}, "
            f"coarse n = {coarse_grid.n}")
    if (fine_grid.origin != coarse_grid.origin
            or fine_grid.extent != coarse_grid.extent):
        raise ValueError("grids must cover the same artificial domain")
    R = restriction_1d(fine_grid.n) if fine_grid.dim == 1 \
        else restriction_2d(fine_grid.n)
    return TransferOperators(R=R, P=canonical_csr(R.T))


def masked_transfers(R_raw: sp.csr_matrix, free_fine: np.ndarray
                     ) -> tuple[sp.csr_matrix, sp.csr_matrix, np.ndarray]:
    """Zero the restriction columns of constrained fine DOFs.

    Returns (R, P, dead) with P = R^T exactly and dead marking coarse DOFs
    whose entire stencil is constrained (all-zero restriction rows); their
    Galerkin rows come out identically zero and are replaced by identity.
    """
    free_fine = np.asarray(free_fine, dtype=bool)
    R = canonical_csr(R_raw @ sp.diags(free_fine.astype(float)))
    R.eliminate_zeros()
    dead = np.diff(R.indptr) == 0
    P = canonical_csr(R.T)
    return R, P, dead


@dataclass
class CycleConfig:
    """Cycle shape and smoothing parameters.

    nu1 / nu2 pre- and post-smoothing sweeps; eta extra cut-DOF sweeps
    appended to every full sweep; gamma_star recursion count (1 = V-cycle,
    2 = W-cycle); coarsest_n the grid size solved exactly;
    dense_coarse_limit switches the exact coarse solve from dense Cholesky
    to a sparse LU beyond that many free DOFs.
    """

    nu1: int = 2
    nu2: int = 1
    eta: int = 0
    gamma_star: int = 1
    coarsest_n: int = 8
    smoother: str = "gauss_seidel"
    omega: float = 2.0 / 3.0
    dense_coarse_limit: int = 2500

    def __post_init__(self):
        if self.gamma_star not in (1, 2):
            raise ValueError(f"gamma_star must be 1 (V-cycle) or 2 (W-cycle), "
                             f"got {self.gamma_star}")
        if self.smoother not in _SMOOTHERS:
            raise ValueError(
                f"smoother must be one of {_SMOOTHERS}, got {self.smoother!r}")
        if self.nu1 < 0 or self.nu2 < 0 or self.eta < 0:
            raise ValueError("sweep counts must be nonnegative")
        if self.coarsest_n < 1:
            raise ValueError("coarsest_n must be at least 1")


def _validate_depth(n: int, coarsest_n: int):
    """The finest n must be coarsest_n * 2**L for some L >= 1."""
    ratio = n // coarsest_n
    if n % coarsest_n or ratio < 2 or ratio & (ratio - 1):
        raise ValueError(
            f"finest n = {n} is not coarsest_n = {coarsest_n} times a power "
            "of two >= 2, so no nested hierarchy reaches the coarsest size")


class MgLevel:
    """One level: its operator, DOF masks, transfers and solver caches."""

    def __init__(self, A: sp.csr_matrix, free: np.ndarray, cut: np.ndarray,
                 grid: Optional[CartesianGrid] = None, n: Optional[int] = None,
                 index: int = 0):
        self.A = canonical_csr(A)
        self.free = np.asarray(free, dtype=bool)
        self.cut = np.asarray(cut, dtype=bool) & self.free
        self.grid = grid
        self.n = n if n is not None else (grid.n if grid is not None else None)
        self.index = index
        self.R: Optional[sp.csr_matrix] = None
        self.P: Optional[sp.csr_matrix] = None
        self.idx_free = np.flatnonzero(self.free)
        self.idx_cut = np.flatnonzero(self.cut)
        self.A_free_rows = self.A[self.idx_free]
        self.A_cut_rows = self.A[self.idx_cut] if self.idx_cut.size else None
        self._free_sweep = None
        self._cut_sweep = None
        self._sweep_key = None
        self._coarse_solve = None

    @property
    def num_dofs(self) -> int:
        return self.A.shape[0]

    def residual_free(self, u: np.ndarray, F: np.ndarray) -> np.ndarray:
        """F - A u at the free DOFs only."""
        return F[self.idx_free] - self.A_free_rows @ u

    def residual(self, u: np.ndarray, F: np.ndarray) -> np.ndarray:
        """F - A u with zeros at constrained DOFs."""
        r = np.zeros_like(F)
        r[self.idx_free] = self.residual_free(u, F)
        return r

    # -- smoothing -----------------------------------------------------------

    def _build_sweep(self, idx: np.ndarray, rows: sp.csr_matrix,
                     config: CycleConfig):
        """Sweep closure u <- u + S^-1 (F - A u)|idx for one DOF subset."""
        A_sub = rows[:, idx].tocsr()
        diag = A_sub.diagonal()
        if np.any(diag == 0.0):
            raise ZeroDivisionError(
                "smoother hit a zero diagonal; the operator is missing a "
                "stabilization or identity contribution")
        if config.smoother == "gauss_seidel":
            lower = spla.splu(sp.tril(A_sub, format="csc"),
                              permc_spec="NATURAL",
                              options={"DiagPivotThresh": 0.0,
                                       "SymmetricMode": True})

            def sweep(u, F):
                u[idx] += lower.solve(F[idx] - rows @ u)
        else:
            scale = config.omega / diag

            def sweep(u, F):
                u[idx] += scale * (F[idx] - rows @ u)

        return sweep

    def prepare_smoothers(self, config: CycleConfig):
        key = (config.smoother, config.omega)
        if self._sweep_key == key:
            return
        self._free_sweep = self._build_sweep(self.idx_free, self.A_free_rows,
                                             config)
        if self.idx_cut.size:
            self._cut_sweep = self._build_sweep(self.idx_cut, self.A_cut_rows,
                                                config)
        self._sweep_key = key

    def smooth(self, u: np.ndarray, F: np.ndarray, eta: int):
        """One full sweep over the free DOFs plus eta extra cut-DOF sweeps."""
        self._free_sweep(u, F)
        if self._cut_sweep is not None:
            for _ in range(eta):
                self._cut_sweep(u, F)

    # -- exact coarsest solve ------------------------------------------------

    def prepare_coarse_solver(self, config: CycleConfig):
        A_ff = self.A_free_rows[:, self.idx_free].toarray() \
            if self.idx_free.size <= config.dense_coarse_limit else None
        if A_ff is not None:
            try:
                factor = scipy.linalg.cho_factor(A_ff, lower=True)
            except scipy.linalg.LinAlgError as err:
                raise NotSPDError(
                    "coarsest operator is not positive definite; a penalty "
                    "below the trace constant (gamma <= 1) can cause this"
                ) from err

            def solve_free(b):
                return scipy.linalg.cho_solve(factor, b)
        else:
            lu = spla.splu(self.A_free_rows[:, self.idx_free].tocsc())

            def solve_free(b):
                return lu.solve(b)

        idx = self.idx_free
        fixed = ~self.free

        def solve(F):
            u = np.zeros_like(F)
            u[fixed] = F[fixed]
            u[idx] = solve_free(F[idx])
            return u

        self._coarse_solve = solve

    def coarse_solve(self, F: np.ndarray) -> np.ndarray:
        return self._coarse_solve(F)


@dataclass
class Hierarchy:
    """Prepared multigrid levels plus the cycle configuration."""

    levels: list
    config: CycleConfig

    @property
    def finest(self) -> MgLevel:
        return self.levels[0]


def _finalize(levels: list, config: CycleConfig) -> Hierarchy:
    for level in levels[:-1]:
        level.prepare_smoothers(config)
    levels[-1].prepare_coarse_solver(config)
    return Hierarchy(levels=levels, config=config)


def _symmetrized(A: sp.csr_matrix) -> sp.csr_matrix:
    """Average away the one-ulp asymmetry of a floating-point triple product
    whose exact value is symmetric (P = R^T and A = A^T)."""
    return canonical_csr(0.5 * (A + A.T))


def build_hierarchy(system: AssembledSystem, config: CycleConfig) -> Hierarchy:
    """Hierarchy for an assembled 2D system.

    Coarse operators are Galerkin products with masked transfers; coarse free
    masks come from the transfer support, while coarse cut masks (used only
    to steer the extra smoothing sweeps) come from re-classifying the level
    set on each coarser grid.
    """
    problem = system.problem
    _validate_depth(system.grid.n, config.coarsest_n)
    levels = [MgLevel(system.A, system.free_dofs, system.cut_dofs,
                      grid=system.grid)]
    while levels[-1].n > config.coarsest_n:
        fine = levels[-1]
        R, P, dead = masked_transfers(restriction_2d(fine.n), fine.free)
        A_c = _symmetrized(rap_product(R, fine.A, P)) \
            + sp.diags(dead.astype(float))
        grid_c = fine.grid.coarsen()
        free_c = ~dead
        cut_c = classify_cells(
            snap_nodes(grid_c, problem.levelset, problem.alpha)).cut_nodes \
            & free_c
        fine.R, fine.P = R, P
        levels.append(MgLevel(canonical_csr(A_c), free_c, cut_c, grid=grid_c,
                              index=len(levels)))
    return _finalize(levels, config)


def build_hierarchy_1d(system: OneDimSystem, config: CycleConfig) -> Hierarchy:
    """Hierarchy for a 1D interval system; every node is free, and the cut
    mask holds the two nodes of each boundary cell."""

    def cut_mask(m: int) -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        mask[[0, 1, m - 2, m - 1]] = True
        return mask

    _validate_depth(system.n, config.coarsest_n)
    m = system.A.shape[0]
    levels = [MgLevel(system.A, np.ones(m, dtype=bool), cut_mask(m),
                      n=system.n)]
    while levels[-1].n > config.coarsest_n:
        fine = levels[-1]
        R = restriction_1d(fine.n)
        P = canonical_csr(R.T)
        A_c = _symmetrized(rap_product(R, fine.A, P))
        nc = fine.n // 2
        fine.R, fine.P = R, P
        levels.append(MgLevel(A_c, np.ones(nc + 1, dtype=bool),
                              cut_mask(nc + 1), n=nc, index=len(levels)))
    return _finalize(levels, config)


def _cycle(levels: list, k: int, u: np.ndarray, F: np.ndarray,
           config: CycleConfig, gamma_star: int):
    """One multigrid cycle at level k, updating u in place."""
    level = levels[k]
    if k == len(levels) - 1:
        u[:] = level.coarse_solve(F)
        return
    for _ in range(config.nu1):
        level.smooth(u, F, config.eta)
    F_c = level.R @ level.residual(u, F)
    u_c = np.zeros(levels[k + 1].num_dofs)
    for _ in range(gamma_star):
        _cycle(levels, k + 1, u_c, F_c, config, gamma_star)
    u += level.P @ u_c
    for _ in range(config.nu2):
        level.smooth(u, F, config.eta)


def smooth(level: MgLevel, F: np.ndarray, u: np.ndarray,
           config: CycleConfig) -> np.ndarray:
    """One smoothing step (full free-DOF sweep + eta cut-DOF sweeps)."""
    level.prepare_smoothers(config)
    u = np.array(u, dtype=float, copy=True)
    level.smooth(u, F, config.eta)
    return u


def two_grid_cycle(hierarchy: Hierarchy, F: np.ndarray,
                   u: np.ndarray) -> np.ndarray:
    """One cycle of the two-grid correction scheme (exactly two levels)."""
    if len(hierarchy.levels) != 2:
        raise ValueError(
            f"two-grid cycle needs exactly 2 levels, hierarchy has "
            f"{len(hierarchy.levels)}")
    return mg_cycle(hierarchy, F, u, gamma_star=1)


def mg_cycle(hierarchy: Hierarchy, F: np.ndarray, u: np.ndarray,
             gamma_star: Optional[int] = None) -> np.ndarray:
    """One recursive multigrid cycle (gamma_star 1 = V, 2 = W)."""
    if len(hierarchy.levels) < 2:
        raise ValueError("a cycle needs at least 2 levels")
    if gamma_star is None:
        gamma_star = hierarchy.config.gamma_star
    if gamma_star not in (1, 2):
        raise ValueError(f"gamma_star must be 1 or 2, got {gamma_star}")
    u = np.array(u, dtype=float, copy=True)
    _cycle(hierarchy.levels, 0, u, F, hierarchy.config, gamma_star)
    return u


@dataclass
class ConvergenceTrace:
    """Residual history of a multigrid run.

    residual_norms[m] is the max-norm of the free-DOF residual after m
    cycles; rho_per_iter[m - 1] = residual_norms[m] / residual_norms[m - 1]
    is the per-cycle convergence factor.  diverged flags a run whose
    residual grew for DIVERGENCE_PATIENCE consecutive cycles.
    """

    u: np.ndarray
    residual_norms: np.ndarray
    rho_per_iter: np.ndarray
    wall_ms: float
    diverged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rho_per_iter)

    def rho_mean(self, first: int, last: int) -> float:
        """Average convergence factor over cycles first..last (1-based,
        inclusive)."""
        if not 1 <= first <= last <= len(self.rho_per_iter):
            raise ValueError(
                f"window {first}..{last} outside the {len(self.rho_per_iter)} "
                "recorded cycles")
        return float(np.mean(self.rho_per_iter[first - 1:last]))


def solve(hierarchy: Hierarchy, F: np.ndarray,
          u0: Optional[np.ndarray] = None, max_iters: int = 30,
          target_residual: Optional[float] = None
          ) -> tuple[np.ndarray, ConvergenceTrace]:
    """Run repeated cycles, recording the free-DOF residual max-norm.

    Constrained DOFs (identity rows) are set to their right-hand side values
    up front and never iterated.  With target_residual set, iteration stops
    early once the residual norm drops to it.  A residual that grows for
    DIVERGENCE_PATIENCE consecutive cycles flags the trace as diverged (with
    a warning) but the run is preserved.
    """
    levels = hierarchy.levels
    level0 = levels[0]
    u = np.zeros_like(F) if u0 is None else np.array(u0, dtype=float,
                                                     copy=True)
    fixed = ~level0.free
    u[fixed] = F[fixed]
    gamma_star = hierarchy.config.gamma_star
    start = time.perf_counter()
    norms = [float(np.max(np.abs(level0.residual_free(u, F)), initial=0.0))]
    rhos = []
    growing = 0
    diverged = False
    for _ in range(max_iters):
        _cycle(levels, 0, u, F, hierarchy.config, gamma_star)
        rn = float(np.max(np.abs(level0.residual_free(u, F)), initial=0.0))
        rhos.append(rn / norms[-1] if norms[-1] > 0.0 else 0.0)
        norms.append(rn)
        growing = growing + 1 if rhos[-1] > 1.0 else 0
        if growing >= DIVERGENCE_PATIENCE and not diverged:
            diverged = True
            warnings.warn(
                f"residual grew for {DIVERGENCE_PATIENCE} consecutive "
                "cycles; continuing and keeping the trace", RuntimeWarning)
        if target_residual is not None and rn <= target_residual:
            break
    wall_ms = 1e3 * (time.perf_counter() - start)
    trace = ConvergenceTrace(u=u, residual_norms=np.array(norms),
                             rho_per_iter=np.array(rhos), wall_ms=wall_ms,
                             diverged=diverged)
    return u, trace


def verify_splitting_equivalence(system: OneDimSystem, u: np.ndarray,
                                 restrict: Optional[sp.csr_matrix] = None
                                 ) -> float:
    """Max abs difference between restricting the full fine residual and
    rebuilding its boundary pieces directly on the coarse grid.

    The interval system's residual splits into an interior part plus
    Dirichlet-flux, penalty and Neumann parts proportional to the boundary
    data residuals; restriction preserves each piece, so the difference is
    zero to roundoff for every iterate.
    """
    if restrict is None:
        restrict = restriction_1d(system.n)
    r_fine = system.F - system.A @ u
    direct = restrict @ r_fine
    split = split_residual_coarse(system, u, restrict)
    return float(np.max(np.abs(direct - split)))
