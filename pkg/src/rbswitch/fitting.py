"""Least-squares fit of vapor temperature and intra-cavity control power to contrast data.

The model is the steady-state diagonal contrast (``delta_c = delta_s``) from
:func:`rbswitch.sweeps.diagonal_contrast`.  Two optimizers are provided:
a bounded Nelder-Mead simplex and a brute-force grid search with successive
refinement that serves as its oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from pathlib import Path

import numpy as np

from .atomic import FieldConfig, LadderAtom, VaporCell
from .cavity import RingCavity
from .errors import ConfigError, DomainError
from .sweeps import diagonal_contrast

__all__ = [
    "PARAM_NAMES",
    "DEFAULT_BOUNDS",
    "FIT_METHODS",
    "FitProblem",
    "FitResult",
    "objective",
    "nelder_mead",
    "grid_refine",
    "fit_least_squares",
    "synthetic_data",
    "load_fit_data",
]

PARAM_NAMES = ("temperature_K", "intracavity_power_W")
DEFAULT_BOUNDS = {"temperature_K": (300.0, 400.0), "intracavity_power_W": (0.05, 2.0)}
FIT_METHODS = ("nelder_mead", "grid_refine")
DATA_HEADER = ("detuning_ghz", "contrast")


@dataclass(frozen=True)
class FitProblem:
    """Contrast-vs-detuning data plus every model setting that stays fixed.

    ``cell.temperature`` and ``field.control_power`` are overwritten by the
    free parameters; field detunings are ignored (the data set them).
    """

    detuning_ghz: np.ndarray
    contrast: np.ndarray
    bounds: dict = dc_field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    field: FieldConfig = dc_field(default_factory=lambda: FieldConfig(0.0, 0.0))
    atom: LadderAtom = dc_field(default_factory=LadderAtom.from_table)
    cell: VaporCell = dc_field(default_factory=VaporCell)
    cavity: RingCavity = dc_field(default_factory=RingCavity)
    bias_policy: str = "control_on_resonant"

    def __post_init__(self):
        x = np.asarray(self.detuning_ghz, dtype=float)
        y = np.asarray(self.contrast, dtype=float)
        object.__setattr__(self, "detuning_ghz", x)
        object.__setattr__(self, "contrast", y)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError("detuning and contrast must be 1-D arrays of equal length")
        if x.size < 5:
            raise DomainError(f"a fit needs at least 5 data points, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("fit data must be finite")
        if set(self.bounds) != set(PARAM_NAMES):
            raise ConfigError(f"bounds must give exactly {PARAM_NAMES}, got {sorted(self.bounds)}")
        for name in PARAM_NAMES:
            lo, hi = self.bounds[name]
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ConfigError(f"bounds[{name!r}] = {self.bounds[name]!r} must be finite with lower < upper")
        lo_T, hi_T = self.bounds["temperature_K"]
        lo_P = self.bounds["intracavity_power_W"][0]
        if lo_T <= 273 or hi_T >= 500 or lo_P < 0:
            raise DomainError("temperature bounds must lie in (273, 500) K and power bounds must be >= 0")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.bounds[name][0] for name in PARAM_NAMES], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.bounds[name][1] for name in PARAM_NAMES], dtype=float)

    def model(self, temperature: float, power: float) -> np.ndarray:
        cell = replace(self.cell, temperature=float(temperature))
        fld = replace(self.field, control_power=float(power))
        return diagonal_contrast(self.detuning_ghz, fld, self.atom, cell, self.cavity, bias_policy=self.bias_policy)


@dataclass(frozen=True)
class FitResult:
    best_params: dict
    residual_norm: float
    iterations: int
    converged: bool
    method: str
    evaluations: int = 0
    param_trace: list | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "best_params": {name: float(self.best_params[name]) for name in PARAM_NAMES},
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "evaluations": int(self.evaluations),
            "converged": bool(self.converged),
        }
        if self.param_trace is not None:
            out["param_trace"] = [[float(v) for v in row] for row in self.param_trace]
        return out


def objective(problem: FitProblem, temperature: float, power: float) -> float:
    """Sum of squared contrast residuals; ``inf`` where the model is undefined."""
    try:
        r = problem.model(temperature, power) - problem.contrast
    except DomainError:
        return math.inf
    value = float(np.dot(r, r))
    return value if math.isfinite(value) else math.inf


class _Counter:
    """Objective in normalized box coordinates with an evaluation count."""

    def __init__(self, problem: FitProblem):
        self.problem = problem
        self.lo = problem.lower
        self.span = problem.upper - problem.lower
        self.calls = 0

    def params(self, u) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=float) * self.span

    def __call__(self, u) -> float:
        self.calls += 1
        T, P = self.params(u)
        return objective(self.problem, T, P)


def _reflect(u: np.ndarray) -> np.ndarray:
    """Fold coordinates back into [0, 1] by mirror reflection at the walls."""
    u = np.mod(u, 2.0)
    return np.where(u > 1.0, 2.0 - u, u)


def _simplex_run(f: _Counter, u0: np.ndarray, xtol: float, max_iter: int, initial_step: float, max_restarts: int, trace):
    """One bounded Nelder-Mead search from ``u0``; returns (u, f(u), iterations, converged)."""
    iterations = 0
    converged = False
    best_u, best_f = u0, f(u0)
    restarts = 0
    while iterations < max_iter:
        simplex = [best_u.copy()]
        for i in range(2):
            v = best_u.copy()
            v[i] = v[i] + initial_step if v[i] + initial_step <= 1 else v[i] - initial_step
            simplex.append(v)
        simplex = np.array(simplex)
        fs = np.array([best_f] + [f(v) for v in simplex[1:]])
        run_converged = False
        while iterations < max_iter:
            order = np.argsort(fs, kind="stable")
            simplex, fs = simplex[order], fs[order]
            if trace is not None:
                trace.append(list(f.params(simplex[0])) + [float(fs[0])])
            if np.max(np.abs(simplex[1:] - simplex[0])) < xtol:
                run_converged = True
                break
            iterations += 1
            centroid = simplex[:-1].mean(axis=0)
            xr = _reflect(centroid + (centroid - simplex[-1]))
            fr = f(xr)
            if fr < fs[0]:
                xe = _reflect(centroid + 2.0 * (centroid - simplex[-1]))
                fe = f(xe)
                simplex[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < fs[-2]:
                simplex[-1], fs[-1] = xr, fr
            else:
                if fr < fs[-1]:
                    xc = _reflect(centroid + 0.5 * (xr - centroid))
                else:
                    xc = _reflect(centroid + 0.5 * (simplex[-1] - centroid))
                fc = f(xc)
                if fc < min(fr, fs[-1]):
                    simplex[-1], fs[-1] = xc, fc
                else:
                    simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                    fs[1:] = [f(v) for v in simplex[1:]]
        i_best = int(np.argmin(fs))
        moved = np.max(np.abs(simplex[i_best] - best_u)) >= xtol
        if fs[i_best] < best_f:
            best_u, best_f = simplex[i_best].copy(), float(fs[i_best])
        if not run_converged:
            break
        if restarts >= max_restarts or (restarts > 0 and not moved):
            converged = True
            break
        restarts += 1
        initial_step = max(initial_step / 5, 10 * xtol)
    return best_u, best_f, iterations, converged


def nelder_mead(
    problem: FitProblem,
    x0=None,
    *,
    starts: int = 4,
    xtol: float = 1e-4,
    max_iter: int = 500,
    initial_step: float = 0.1,
    max_restarts: int = 5,
    keep_trace: bool = False,
) -> FitResult:
    """Bounded multistart Nelder-Mead on the box normalized to [0, 1]^2.

    Without ``x0`` the search starts from the centres of a ``starts`` x
    ``starts`` partition of the box and keeps the best result; the contrast
    objective has several local minima because the phase shift wraps through
    multiples of 2 pi as the power grows.  Trial points that leave the box are
    mirrored back inside.  A run converges when every vertex lies within
    ``xtol`` (relative to the bound span) of the best one; it then restarts
    from the best vertex with a smaller simplex until a restart no longer
    moves it.  ``max_iter`` applies to each start.
    """
    f = _Counter(problem)
    if x0 is None:
        if int(starts) != starts or starts < 1:
            raise ConfigError(f"starts must be a positive integer, got {starts!r}")
        centres = (np.arange(starts) + 0.5) / starts
        initial = [np.array([a, b]) for a in centres for b in centres]
    else:
        u0 = (np.asarray(x0, dtype=float) - f.lo) / f.span
        if u0.shape != (2,) or np.any(u0 < 0) or np.any(u0 > 1):
            raise DomainError("x0 must be a (temperature, power) pair inside the bounds")
        initial = [u0]
    trace = [] if keep_trace else None
    best = None
    total_iterations = 0
    for u0 in initial:
        u, fu, iterations, converged = _simplex_run(f, u0, xtol, max_iter, initial_step, max_restarts, trace)
        total_iterations += iterations
        if best is None or fu < best[1]:
            best = (u, fu, converged)
    params = f.params(best[0])
    return FitResult(
        best_params=dict(zip(PARAM_NAMES, map(float, params))),
        residual_norm=float(best[1]),
        iterations=total_iterations,
        converged=bool(best[2]),
        method="nelder_mead",
        evaluations=f.calls,
        param_trace=trace,
    )


def _quadratic_polish(f: _Counter, u: np.ndarray, fu: float, h: np.ndarray):
    """Vertex of a full quadratic fitted on the 3x3 stencil of half-width ``h`` around ``u``."""
    offsets = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
    pts = _reflect(u + offsets * h)
    vals = np.array([f(p) if np.any(o) else fu for p, o in zip(pts, offsets)])
    if not np.all(np.isfinite(vals)):
        return u, fu
    a, b = offsets[:, 0], offsets[:, 1]
    design = np.column_stack([np.ones(9), a, b, a * a, a * b, b * b])
    c = np.linalg.lstsq(design, vals, rcond=None)[0]
    hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    if np.linalg.det(hess) <= 0 or hess[0, 0] <= 0:
        return u, fu
    step = np.linalg.solve(hess, -c[1:3])
    if np.max(np.abs(step)) > 1:
        return u, fu
    cand = np.clip(u + step * h, 0.0, 1.0)
    fc = f(cand)
    return (cand, fc) if fc < fu else (u, fu)


def grid_refine(
    problem: FitProblem,
    *,
    points: int = 20,
    refinements: int = 2,
    factor: float = 5.0,
    polish_rounds: int = 6,
    keep_trace: bool = False,
) -> FitResult:
    """Brute-force grid search with successive zooms and a quadratic polish.

    A ``points`` x ``points`` grid covers the bounds; each refinement lays a
    new grid of the same size over a window ``factor`` times smaller, centred
    on the incumbent and shifted to stay inside the bounds.  The final grid
    spacing is the oracle's resolution (one "fine cell").  A quadratic fit on
    a 3x3 stencil then polishes the vertex, halving the stencil each round
    while it keeps improving.
    """
    if points < 3 or refinements < 0 or factor <= 1:
        raise ConfigError("grid_refine needs points >= 3, refinements >= 0 and factor > 1")
    f = _Counter(problem)
    trace = [] if keep_trace else None
    width = np.ones(2)
    lo = np.zeros(2)
    best_u, best_f = None, math.inf
    iterations = 0
    for level in range(refinements + 1):
        axes = [np.linspace(lo[i], lo[i] + width[i], points) for i in range(2)]
        for a in axes[0]:
            for b in axes[1]:
                u = np.array([a, b])
                value = f(u)
                if value < best_f:
                    best_u, best_f = u, value
        iterations += 1
        if trace is not None:
            trace.append(list(f.params(best_u)) + [best_f])
        if level < refinements:
            width = width / factor
            lo = np.clip(best_u - width / 2, 0.0, 1.0 - width)
    if best_u is None:
        return FitResult(dict(zip(PARAM_NAMES, map(float, f.params(np.full(2, 0.5))))), math.inf, iterations, False, "grid_refine", f.calls, trace)
    h = width / (points - 1)
    for _ in range(polish_rounds):
        new_u, new_f = _quadratic_polish(f, best_u, best_f, h)
        iterations += 1
        improved = new_f < best_f
        best_u, best_f = new_u, new_f
        if trace is not None:
            trace.append(list(f.params(best_u)) + [best_f])
        if not improved:
            break
        h = h / 2
    return FitResult(
        best_params=dict(zip(PARAM_NAMES, map(float, f.params(best_u)))),
        residual_norm=float(best_f),
        iterations=iterations,
        converged=math.isfinite(best_f),
        method="grid_refine",
        evaluations=f.calls,
        param_trace=trace,
    )


def fine_cell(problem: FitProblem, points: int = 20, refinements: int = 2, factor: float = 5.0) -> dict:
    """Final grid spacing of :func:`grid_refine` per parameter, in physical units."""
    span = problem.upper - problem.lower
    return dict(zip(PARAM_NAMES, map(float, span / factor**refinements / (points - 1))))


def fit_least_squares(problem: FitProblem, method: str = "nelder_mead", **kwargs) -> FitResult:
    if method == "nelder_mead":
        return nelder_mead(problem, **kwargs)
    if method == "grid_refine":
        return grid_refine(problem, **kwargs)
    raise ConfigError(f"fit method must be one of {FIT_METHODS}, got {method!r}")


def synthetic_data(
    problem_template: FitProblem | None,
    detuning_ghz,
    temperature: float,
    power: float,
    *,
    noise_sigma: float = 0.0,
    seed: int | None = 0,
) -> np.ndarray:
    """Model contrast at (temperature, power), plus optional Gaussian noise from a seeded generator."""
    x = np.asarray(detuning_ghz, dtype=float)
    template = problem_template or FitProblem(x, np.zeros_like(x))
    problem = replace(template, detuning_ghz=x, contrast=np.zeros_like(x))
    y = problem.model(temperature, power)
    if noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, size=y.shape)
    return y


def load_fit_data(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``detuning_ghz,contrast`` CSV; detunings in GHz with ``delta_c = delta_s``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read fit data {path}: {exc}") from exc
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows or tuple(c.strip() for c in rows[0]) != DATA_HEADER:
        raise ConfigError(f"{path}: header must be {','.join(DATA_HEADER)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, 2)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric or malformed row ({exc})") from exc
    if data.shape[0] == 0:
        raise ConfigError(f"{path}: no data rows")
    return data[:, 0], data[:, 1]
