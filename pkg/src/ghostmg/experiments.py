"""Parameter sweeps and accuracy studies over the domain catalog.

An experiment is described by a flat text config (one ``key = value`` per
line, lists comma-separated, ``#`` starts a comment) and expands into a
deterministic cartesian sweep over grid size, boundary position, penalty
factor and extra cut-cell sweeps.  Every parameter point assembles its own
system and hierarchy, runs the homogeneous problem (zero data, all-ones
initial iterate, so the iteration contracts toward the zero solution and the
residual never collides with a nonzero solution's rounding floor), and
records the windowed mean convergence factor.  Failures at one point are
recorded on that row and do not abort the sweep.

Results serialize to CSV with a fixed column set; wall-clock time is the
only nondeterministic column.  Accuracy studies replace the homogeneous
problem with a manufactured solution and report nodal errors and refinement
ratios instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ghostmg import multigrid as mg
from ghostmg.assembly import ProblemSpec, assemble
from ghostmg.geometry import LevelSet, domain_catalog, domain_names
from ghostmg.one_dim import assemble_1d

CSV_HEADER = ("experiment,domain,dim,n,h,theta1,theta2,gamma,eta,cycle,"
              "lambda_mode,rho_mean,final_residual,iters,wall_ms")

ACCURACY_CSV_HEADER = "domain,dim,n,h,linf_error,l2_error,linf_ratio,l2_ratio"

_CYCLES = ("two_grid", "v", "w")
_LAMBDA_MODES = ("local", "global", "inverse_h2")

#: The eleven Dirichlet-cell fractions of the standard 1D sweep.
THETA1_GRID = (0.0099, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 0.9, 0.99, 1.0)


class ConfigError(ValueError):
    """A config file is malformed or inconsistent."""


@dataclass
class ExperimentConfig:
    """One sweep description: the domain, the parameter lists and the cycle.

    Grid sizes are cells per side; h follows from the domain's artificial
    extent.  theta1 drives the 1D Dirichlet-cell sweep; theta drives the
    rectangle's cut-line position; gamma and eta are listable so one config
    covers penalty and extra-smoothing studies.
    """

    experiment: str
    dimension: int
    ns: tuple
    domain: str = ""
    theta1: tuple = (0.5,)
    theta2: float = 0.01
    theta: tuple = ()
    gamma: tuple = ()
    eta: tuple = (0,)
    lambda_mode: str = "local"
    cycle: str = "two_grid"
    nu1: int = 2
    nu2: int = 1
    iterations: int = 0
    window: tuple = ()
    coarsest_n: int = 8
    alpha: float = 0.0
    smoother: str = "gauss_seidel"
    omega: float = 2.0 / 3.0
    output: str = "results.csv"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        one_d = self.dimension == 1
        if not self.domain:
            self.domain = "interval" if one_d else ""
        if one_d:
            if self.domain != "interval":
                raise ConfigError(
                    f"the 1D domain is 'interval', got {self.domain!r}")
        else:
            if self.domain not in domain_names():
                raise ConfigError(
                    f"unknown domain {self.domain!r}; catalog: "
                    f"{', '.join(domain_names())}")
        if not self.ns:
            raise ConfigError("no grid sizes: set 'n' or 'h'")
        if any(n < 4 or n % 2 for n in self.ns):
            raise ConfigError(f"grid sizes must be even and >= 4, got {self.ns}")
        if self.theta and self.domain != "rectangle":
            raise ConfigError("'theta' only applies to the rectangle domain")
        if self.domain == "rectangle" and not self.theta:
            raise ConfigError("the rectangle domain needs a 'theta' list")
        for t in (*self.theta1, *self.theta):
            if not 0.0 < t <= 1.0:
                raise ConfigError(f"cut fractions must be in (0, 1], got {t}")
        if not 0.0 < self.theta2 <= 1.0:
            raise ConfigError(f"theta2 must be in (0, 1], got {self.theta2}")
        if not self.gamma:
            self.gamma = (1.1,) if one_d else (2.0,)
        if self.lambda_mode not in _LAMBDA_MODES:
            raise ConfigError(f"lambda_mode must be one of {_LAMBDA_MODES}, "
                              f"got {self.lambda_mode!r}")
        if self.lambda_mode == "inverse_h2" and not one_d:
            raise ConfigError("lambda_mode inverse_h2 is a 1D diagnostic")
        if self.cycle not in _CYCLES:
            raise ConfigError(f"cycle must be one of {_CYCLES}, "
                              f"got {self.cycle!r}")
        if self.iterations == 0:
            self.iterations = 50 if one_d else 30
        if not self.window:
            self.window = (41, 50) if one_d else (21, 30)
        first, last = self.window
        if not 1 <= first <= last <= self.iterations:
            raise ConfigError(
                f"window {first}..{last} does not fit in {self.iterations} "
                "iterations")
        if self.alpha == 0.0:
            self.alpha = 2.0 if one_d else 1.75
        if any(e < 0 for e in self.eta):
            raise ConfigError("eta values must be nonnegative")


_LIST_KEYS = {"n", "h", "theta1", "theta", "gamma", "eta", "window"}
_KNOWN_KEYS = {"experiment", "dimension", "domain", "n", "h", "theta1",
               "theta2", "theta", "gamma", "eta", "lambda_mode", "cycle",
               "nu1", "nu2", "iterations", "window", "coarsest_n", "alpha",
               "smoother", "omega", "output"}
_INT_KEYS = {"dimension", "nu1", "nu2", "iterations", "coarsest_n"}
_FLOAT_KEYS = {"theta2", "alpha", "omega"}


def _parse_number(token: str) -> float:
    """A float literal, allowing the power forms 2^-7 and 2**-7."""
    token = token.replace("**", "^")
    if "^" in token:
        base, _, exponent = token.partition("^")
        return float(base) ** float(exponent)
    return float(token)


def _artificial_extent(domain: str) -> float:
    if domain in ("interval", ""):
        return 1.0
    if domain == "rectangle":
        return domain_catalog("rectangle", theta=0.5, h=0.125).art_extent
    return domain_catalog(domain).art_extent


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat key = value config format."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        raw[key] = value

    if "experiment" not in raw:
        raise ConfigError("missing required key 'experiment'")
    if "dimension" not in raw:
        raise ConfigError("missing required key 'dimension'")
    if ("n" in raw) == ("h" in raw):
        raise ConfigError("set exactly one of 'n' or 'h'")

    kwargs: dict = {"experiment": raw.pop("experiment")}
    try:
        kwargs["dimension"] = int(raw.pop("dimension"))
    except ValueError as err:
        raise ConfigError(f"dimension: {err}") from err

    lists: dict = {}
    for key, value in raw.items():
        try:
            if key in _LIST_KEYS:
                lists[key] = tuple(_parse_number(tok.strip())
                                   for tok in value.split(","))
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        except ValueError as err:
            raise ConfigError(f"{key}: {err}") from err

    if "n" in lists:
        ns = lists.pop("n")
        if any(v != int(v) for v in ns):
            raise ConfigError(f"grid sizes must be integers, got {ns}")
        kwargs["ns"] = tuple(int(v) for v in ns)
    else:
        extent = _artificial_extent(kwargs.get("domain", "")
                                    or ("interval" if kwargs["dimension"] == 1
                                        else ""))
        kwargs["ns"] = tuple(int(round(extent / h)) for h in lists.pop("h"))
    if "eta" in lists:
        etas = lists.pop("eta")
        if any(v != int(v) for v in etas):
            raise ConfigError(f"eta values must be integers, got {etas}")
        kwargs["eta"] = tuple(int(v) for v in etas)
    if "window" in lists:
        window = lists.pop("window")
        if len(window) != 2 or any(v != int(v) for v in window):
            raise ConfigError(f"window takes two integers, got {window}")
        kwargs["window"] = (int(window[0]), int(window[1]))
    kwargs.update(lists)
    return ExperimentConfig(**kwargs)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


@dataclass
class ResultRow:
    """One parameter point of a sweep; metric fields are None on failure and
    the error text is kept on the row (it is not serialized)."""

    experiment: str
    domain: str
    dim: int
    n: int
    h: float
    theta1: Optional[float]
    theta2: Optional[float]
    gamma: Optional[float]
    eta: int
    cycle: str
    lambda_mode: str
    rho_mean: Optional[float] = None
    final_residual: Optional[float] = None
    iters: Optional[int] = None
    wall_ms: Optional[float] = None
    error: Optional[str] = None

    def csv_line(self) -> str:
        fields = (self.experiment, self.domain, self.dim, self.n, self.h,
                  self.theta1, self.theta2, self.gamma, self.eta, self.cycle,
                  self.lambda_mode, self.rho_mean, self.final_residual,
                  self.iters, self.wall_ms)
        return ",".join(_format_field(v) for v in fields)


def _format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _cycle_config(config: ExperimentConfig, n: int, eta: int) -> mg.CycleConfig:
    coarsest = n // 2 if config.cycle == "two_grid" else config.coarsest_n
    return mg.CycleConfig(nu1=config.nu1, nu2=config.nu2, eta=eta,
                          gamma_star=2 if config.cycle == "w" else 1,
                          coarsest_n=coarsest, smoother=config.smoother,
                          omega=config.omega)


def _run_homogeneous(hierarchy: mg.Hierarchy, num_dofs: int,
                     iterations: int) -> mg.ConvergenceTrace:
    F = np.zeros(num_dofs)
    _, trace = mg.solve(hierarchy, F, u0=np.ones(num_dofs),
                        max_iters=iterations)
    return trace


def _point_1d(config: ExperimentConfig, n: int, t1: float, gamma: float,
              eta: int) -> ResultRow:
    h = 1.0 / n
    row = ResultRow(experiment=config.experiment, domain="interval", dim=1,
                    n=n, h=h, theta1=t1, theta2=config.theta2,
                    gamma=None if config.lambda_mode == "inverse_h2" else gamma,
                    eta=eta, cycle=config.cycle,
                    lambda_mode=config.lambda_mode)
    start = time.perf_counter()
    # The 1D trace constant is 1/(theta1 h) whether sized per cell or
    # globally (a single Dirichlet cell), so local and global coincide.
    lam = (1.0 / h ** 2 if config.lambda_mode == "inverse_h2"
           else gamma / (t1 * h))
    system = assemble_1d(n, t1, config.theta2, lam)
    hierarchy = mg.build_hierarchy_1d(system, _cycle_config(config, n, eta))
    trace = _run_homogeneous(hierarchy, n + 1, config.iterations)
    row.rho_mean = trace.rho_mean(*config.window)
    row.final_residual = float(trace.residual_norms[-1])
    row.iters = trace.iterations
    row.wall_ms = 1e3 * (time.perf_counter() - start)
    return row


def _levelset_for(config: ExperimentConfig, h: float,
                  theta: Optional[float]) -> LevelSet:
    if config.domain == "rectangle":
        return domain_catalog("rectangle", theta=theta, h=h)
    return domain_catalog(config.domain)


def _point_2d(config: ExperimentConfig, n: int, theta: Optional[float],
              gamma: float, eta: int) -> ResultRow:
    extent = _artificial_extent(config.domain)
    h = extent / n
    row = ResultRow(experiment=config.experiment, domain=config.domain, dim=2,
                    n=n, h=h, theta1=theta, theta2=theta, gamma=gamma,
                    eta=eta, cycle=config.cycle,
                    lambda_mode=config.lambda_mode)
    start = time.perf_counter()
    levelset = _levelset_for(config, h, theta)
    problem = ProblemSpec(
        levelset=levelset, h=h, gamma=gamma, lambda_mode=config.lambda_mode,
        alpha=config.alpha,
        strong_predicate=levelset.params.get("strong_predicate"))
    system = assemble(problem)
    hierarchy = mg.build_hierarchy(system, _cycle_config(config, n, eta))
    trace = _run_homogeneous(hierarchy, system.A.shape[0], config.iterations)
    row.rho_mean = trace.rho_mean(*config.window)
    row.final_residual = float(trace.residual_norms[-1])
    row.iters = trace.iterations
    row.wall_ms = 1e3 * (time.perf_counter() - start)
    return row


def run_experiment(config: ExperimentConfig) -> list:
    """Expand the config's cartesian sweep and run every parameter point.

    The sweep order is grid size, then boundary position, then gamma, then
    eta; it is deterministic so reruns produce identical rows.  A failing
    point yields a row with empty metrics and the error recorded on it.
    """
    rows = []
    positions: Sequence = ((config.theta1 if config.dimension == 1
                            else config.theta) or (None,))
    for n in config.ns:
        for position in positions:
            for gamma in config.gamma:
                for eta in config.eta:
                    try:
                        if config.dimension == 1:
                            rows.append(_point_1d(config, n, position,
                                                  gamma, eta))
                        else:
                            rows.append(_point_2d(config, n, position,
                                                  gamma, eta))
                    except Exception as err:  # noqa: BLE001 - sweep isolation
                        extent = (1.0 if config.dimension == 1
                                  else _artificial_extent(config.domain))
                        rows.append(ResultRow(
                            experiment=config.experiment,
                            domain=config.domain, dim=config.dimension,
                            n=n, h=extent / n, theta1=position,
                            theta2=(config.theta2 if config.dimension == 1
                                    else position),
                            gamma=gamma, eta=eta, cycle=config.cycle,
                            lambda_mode=config.lambda_mode,
                            error=f"{type(err).__name__}: {err}"))
    return rows


@dataclass
class AccuracyRow:
    """Nodal errors of a manufactured-solution solve at one grid size.

    Ratios compare against the previous (coarser) row and are None on the
    first row.
    """

    domain: str
    dim: int
    n: int
    h: float
    linf_error: float
    l2_error: float
    linf_ratio: Optional[float] = None
    l2_ratio: Optional[float] = None

    def csv_line(self) -> str:
        fields = (self.domain, self.dim, self.n, self.h, self.linf_error,
                  self.l2_error, self.linf_ratio, self.l2_ratio)
        return ",".join(_format_field(v) for v in fields)


def run_accuracy_study(config: ExperimentConfig,
                       target_residual: float = 1e-10) -> list:
    """Solve a manufactured problem at each grid size and report errors.

    1D uses u(x) = x on the cut interval (reproduced exactly by the linear
    elements, so errors sit at roundoff); 2D uses u = sin(pi x) sin(pi y) on
    a pure-Dirichlet catalog domain.  Errors are measured at the nodes
    strictly inside the domain: ghost values approximate an extension of the
    solution rather than the solution itself, so their deviation from the
    manufactured formula says nothing about the order of the method.
    """
    rows = []
    for n in config.ns:
        if config.dimension == 1:
            rows.append(_accuracy_point_1d(config, n, target_residual))
        else:
            rows.append(_accuracy_point_2d(config, n, target_residual))
    for prev, cur in zip(rows, rows[1:]):
        cur.linf_ratio = prev.linf_error / cur.linf_error
        cur.l2_ratio = prev.l2_error / cur.l2_error
    return rows


def _accuracy_point_1d(config: ExperimentConfig, n: int,
                       target_residual: float) -> AccuracyRow:
    h = 1.0 / n
    t1 = config.theta1[0]
    gamma = config.gamma[0]
    a = (1.0 - t1) * h
    system = assemble_1d(n, t1, config.theta2, gamma / (t1 * h),
                         f=None, g_a=a, g_b=1.0)
    hierarchy = mg.build_hierarchy_1d(system, _cycle_config(config, n,
                                                            config.eta[0]))
    u, _ = mg.solve(hierarchy, system.F, max_iters=200,
                    target_residual=target_residual)
    x = h * np.arange(n + 1)
    err = np.abs(u - x)
    return AccuracyRow(domain="interval", dim=1, n=n, h=h,
                       linf_error=float(err.max()),
                       l2_error=float(np.sqrt(h * np.sum(err ** 2))))


def _accuracy_point_2d(config: ExperimentConfig, n: int,
                       target_residual: float) -> AccuracyRow:
    def exact(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def source(x, y):
        return 2.0 * np.pi ** 2 * np.sin(np.pi * x) * np.sin(np.pi * y)

    extent = _artificial_extent(config.domain)
    h = extent / n
    levelset = _levelset_for(config, h, config.theta[0] if config.theta
                             else None)
    problem = ProblemSpec(
        levelset=levelset, h=h, f=source, g_dirichlet=exact,
        g_neumann=None, gamma=config.gamma[0],
        lambda_mode=config.lambda_mode, alpha=config.alpha,
        strong_predicate=levelset.params.get("strong_predicate"))
    system = assemble(problem)
    hierarchy = mg.build_hierarchy(system, _cycle_config(config, n,
                                                         config.eta[0]))
    u, _ = mg.solve(hierarchy, system.F, max_iters=200,
                    target_residual=target_residual)
    X, Y = system.grid.node_coordinates()
    interior = system.field.values < 0.0
    err = np.abs(u - exact(X, Y))[interior]
    return AccuracyRow(domain=config.domain, dim=2, n=n, h=h,
                       linf_error=float(err.max()),
                       l2_error=float(np.sqrt(h * h * np.sum(err ** 2))))


def emit_results(rows: list, path: Union[str, Path]) -> Path:
    """Write sweep rows as CSV (fixed header, one line per row)."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    lines = [CSV_HEADER] + [row.csv_line() for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def emit_accuracy(rows: list, path: Union[str, Path]) -> Path:
    """Write accuracy-study rows as CSV."""
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    lines = [ACCURACY_CSV_HEADER] + [row.csv_line() for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
