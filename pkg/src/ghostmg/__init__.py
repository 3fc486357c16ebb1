"""Geometric multigrid for ghost nodal finite element discretizations.

The package solves the Poisson equation on domains defined implicitly by a
level-set function, discretized with bilinear elements on a background
Cartesian grid.  Dirichlet conditions are enforced weakly (Nitsche), with the
penalty sized per cut cell from a local generalized eigenvalue problem, and
the resulting systems are solved by two-grid, V- and W-cycles whose transfer
operators come from the shape-function refinement identity.

Subpackages
-----------
linalg
    CSR helpers, smoother sweeps, Galerkin triple product, deflated
    generalized eigensolver.
geometry
    Background grids, level sets, node snapping, cell classification and cut
    geometry extraction, plus the catalog of benchmark domains.
assembly
    Bilinear/linear form assembly in 2D; element kernels; strong Dirichlet
    elimination; residual evaluation.
one_dim
    Closed-form 1D system blocks for the interval domain with one weak
    Dirichlet and one Neumann end.
stabilization
    Penalty constants: closed forms for 1D/triangle/pentagon cuts, local
    eigensolve for any cut, global constants.
multigrid
    Transfer operators, level hierarchies, smoothing, cycles, convergence
    traces, and the 1D residual splitting identity.
experiments
    Config parsing, parameter sweeps, accuracy studies, CSV output.
cli
    The `ghostmg` command: run sweeps, list domains, verify invariants.
"""

from ghostmg import (assembly, cli, experiments, geometry, linalg, multigrid,
                     one_dim, stabilization)

__all__ = [
    "assembly",
    "cli",
    "experiments",
    "geometry",
    "linalg",
    "multigrid",
    "one_dim",
    "stabilization",
]

__version__ = "0.1.0"
