"""Stiffness maximization under a bending-angle equality.

The objective is the out-of-plane stiffness ``k_o = F/(U + eps)`` built
from the displacement and force surrogates; the free bending angle
surrogate must hit a target ``theta_target``.  Problems are solved in
normalized coordinates by :func:`oopstiff.sqp.sqp_minimize` on ``-k_o``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._io import atomic_write_text, write_csv
from .design_space import DesignSpace, is_feasible, sobol_sample
from .exceptions import DomainError, MultistartError, PoleError
from .sqp import SqpSettings, sqp_minimize
from .surrogate import RbfSurrogate, SurrogateTriple

STRICT_MARGIN = 1e-6


@dataclass(frozen=True)
class StiffnessObjective:
    U_model: RbfSurrogate
    F_model: RbfSurrogate
    theta_model: RbfSurrogate
    epsilon: float = 1.0
    target_angle: float = 1.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        keys = {(m.space.parameters, m.space.constraints) for m in (self.U_model, self.F_model, self.theta_model)}
        if len(keys) != 1:
            raise DomainError("U, F and theta surrogates must share one design space")

    @classmethod
    def from_triple(cls, models: SurrogateTriple, epsilon=1.0, target_angle=1.5):
        return cls(models.U, models.F, models.theta, epsilon, target_angle)

    @property
    def space(self) -> DesignSpace:
        return self.theta_model.space


def _denominator(obj, x):
    den = obj.U_model.predict(x) + obj.epsilon
    if np.any(den <= 0):
        raise PoleError("U surrogate + epsilon is non-positive; stiffness undefined here")
    return den


def stiffness(obj: StiffnessObjective, x):
    """``F(x) / (U(x) + eps)`` in N/mm."""
    den = _denominator(obj, x)
    return obj.F_model.predict(x) / den


def stiffness_gradient(obj: StiffnessObjective, x) -> np.ndarray:
    den = np.asarray(_denominator(obj, x))[..., None]
    F = np.asarray(obj.F_model.predict(x))[..., None]
    return (obj.F_model.gradient(x) * den - F * obj.U_model.gradient(x)) / den ** 2


def target_angle(total_angle: float, gripper_units: int, model_units: int) -> float:
    """Angle (rad) a ``model_units``-unit segment must bend for a finger of
    ``gripper_units`` units to reach ``total_angle`` degrees."""
    if total_angle <= 0:
        raise DomainError("total angle must be positive")
    if gripper_units < 1 or model_units < 1:
        raise DomainError("unit counts must be >= 1")
    return math.radians(total_angle) * model_units / gripper_units


@dataclass
class OptimizationResult:
    x_star: np.ndarray
    objective_value: float
    theta_value: float
    constraint_residual: float
    kkt_stationarity: float
    active_bounds: list
    iterations: int
    starts_tried: int
    converged: bool
    message: str = ""
    x0: np.ndarray | None = None
    trace: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 200
    max_line_search: int = 40
    stationarity_tol: float = 1e-6
    eq_rel_tol: float = 1e-4
    margin: float = STRICT_MARGIN

    def sqp(self, target) -> SqpSettings:
        return SqpSettings(max_iter=self.max_iter, max_line_search=self.max_line_search,
                           stationarity_tol=self.stationarity_tol,
                           eq_tol=self.eq_rel_tol * abs(target))


def _unit_problem(space: DesignSpace, margin: float):
    lb = np.array([margin if p.lower_strict else 0.0 for p in space.parameters])
    ub = np.array([1.0 - margin if p.upper_strict else 1.0 for p in space.parameters])
    A, b = space.constraint_matrix
    lo, span = space.lower, space.span
    A_u = A * span
    b_u = b - A @ lo - margin * np.abs(A_u).sum(axis=1)
    return lb, ub, A_u, b_u


def _active_names(space, u, lb, ub, A_u, b_u, tol=1e-6):
    out = []
    for i, p in enumerate(space.parameters):
        if u[i] - lb[i] <= tol:
            out.append(f"{p.name}=lower")
        elif ub[i] - u[i] <= tol:
            out.append(f"{p.name}=upper")
    for k, con in enumerate(space.constraints):
        if b_u[k] - A_u[k] @ u <= tol:
            out.append(f"constraint:{con.label or k}")
    return out


def solve(obj: StiffnessObjective, space: DesignSpace | None = None, x0=None,
          settings: OptimizerSettings = OptimizerSettings()) -> OptimizationResult:
    """Maximize stiffness subject to theta(x) = target from ``x0`` (default: median).

    Open bounds and strict linear constraints are tightened by
    ``settings.margin`` (normalized units) so a closed-set solver can honour
    them.
    """
    space = obj.space if space is None else space
    x0 = space.median if x0 is None else np.asarray(x0, dtype=float)
    if not is_feasible(x0, space):
        raise DomainError(f"initial point {x0.tolist()} is infeasible")
    lo, span = space.lower, space.span
    lb, ub, A_u, b_u = _unit_problem(space, settings.margin)
    u0 = np.clip((x0 - lo) / span, lb, ub)
    if A_u.size and np.any(A_u @ u0 > b_u):
        raise DomainError("initial point lies within the strict-constraint margin")
    target = obj.target_angle

    def to_x(u):
        return lo + u * span

    def f(u):
        return -float(stiffness(obj, to_x(u)))

    def g(u):
        return -stiffness_gradient(obj, to_x(u)) * span

    def c(u):
        return np.array([obj.theta_model.predict(to_x(u)) - target])

    def cj(u):
        return (obj.theta_model.gradient(to_x(u)) * span)[None, :]

    res = sqp_minimize(f, g, u0, lb, ub, c, cj, A_u, b_u, settings.sqp(target),
                       eq_names=[f"theta = {target:.6g} rad"])
    u = res.x
    x = to_x(u)
    theta = float(obj.theta_model.predict(x))
    conv = res.converged and bool(is_feasible(x, space))
    return OptimizationResult(
        x_star=x,
        objective_value=-res.fun,
        theta_value=theta,
        constraint_residual=abs(theta - target),
        kkt_stationarity=res.stationarity,
        active_bounds=_active_names(space, u, lb, ub, A_u, b_u),
        iterations=res.nit,
        starts_tried=1,
        converged=conv,
        message=res.message,
        x0=x0,
        trace=res.trace,
    )


def multistart(obj: StiffnessObjective, space: DesignSpace | None = None, starts: int = 8,
               seed: int = 0, settings: OptimizerSettings = OptimizerSettings()) -> OptimizationResult:
    """Best converged :func:`solve` over the median plus ``starts - 1`` scrambled Sobol points.

    Ties in objective value go to the lowest start index.  Raises
    :class:`MultistartError` (carrying every per-start result) if no start
    converges.
    """
    if starts < 1:
        raise DomainError("starts must be >= 1")
    space = obj.space if space is None else space
    x0s = [space.median]
    if starts > 1:
        x0s.extend(sobol_sample(space, starts - 1, skip=0, scramble_seed=seed))
    results = [solve(obj, space, x0, settings) for x0 in x0s]
    best = None
    for r in results:
        if r.converged and (best is None or r.objective_value > best.objective_value):
            best = r
    if best is None:
        msgs = "; ".join(f"start {i}: {r.message}" for i, r in enumerate(results))
        raise MultistartError(f"no start converged ({msgs})", results)
    return replace(best, starts_tried=len(results))


def response_surface(obj: StiffnessObjective, p1: str, p2: str, resolution: int = 50,
                     fixed: Mapping[str, float] | None = None) -> np.ndarray:
    """Grid of ``(p1, p2, theta, k_o)`` rows over the full ranges of two parameters.

    Other parameters sit at ``fixed`` values, defaulting to medians.
    """
    space = obj.space
    if p1 == p2:
        raise DomainError("surface needs two distinct parameters")
    i, j = space.index(p1), space.index(p2)
    if resolution < 2:
        raise DomainError("resolution must be >= 2")
    base = space.median
    for k, v in (fixed or {}).items():
        base[space.index(k)] = float(v)
    a = np.linspace(space.parameters[i].lower, space.parameters[i].upper, resolution)
    b = np.linspace(space.parameters[j].lower, space.parameters[j].upper, resolution)
    A, Bg = np.meshgrid(a, b, indexing="ij")
    X = np.tile(base, (resolution * resolution, 1))
    X[:, i] = A.ravel()
    X[:, j] = Bg.ravel()
    return np.column_stack([X[:, i], X[:, j], obj.theta_model.predict(X), stiffness(obj, X)])


# --- reporting -----------------------------------------------------------

RESULT_FIELDS = ["converged", "objective_value", "theta_value", "target_angle", "constraint_residual",
                 "kkt_stationarity", "iterations", "starts_tried", "active_bounds", "message"]


def write_result_csv(result: OptimizationResult, space: DesignSpace, target: float, path) -> Path:
    header = list(space.names) + RESULT_FIELDS
    row = [float(v) for v in result.x_star] + [
        int(result.converged), float(result.objective_value), float(result.theta_value), float(target),
        float(result.constraint_residual), float(result.kkt_stationarity), result.iterations,
        result.starts_tried, ";".join(result.active_bounds), result.message,
    ]
    return write_csv(path, header, [row])


def format_report(result: OptimizationResult, space: DesignSpace, target: float, obj=None) -> str:
    lines = ["Stiffness optimization", "======================", ""]
    lines.append(f"{'parameter':<10} {'initial':>12} {'optimized':>12} unit")
    for k, p in enumerate(space.parameters):
        init = "" if result.x0 is None else f"{result.x0[k]:12.4f}"
        lines.append(f"{p.name:<10} {init:>12} {result.x_star[k]:12.4f} {p.unit}")
    lines.append("")
    if obj is not None and result.x0 is not None:
        lines.append(f"initial k_o        : {float(stiffness(obj, result.x0)):.6g} N/mm")
        lines.append(f"initial theta      : {float(obj.theta_model.predict(result.x0)):.6g} rad")
    lines += [
        f"optimized k_o      : {result.objective_value:.6g} N/mm",
        f"optimized theta    : {result.theta_value:.6g} rad (target {target:.6g})",
        f"|theta - target|   : {result.constraint_residual:.3g} rad",
        f"KKT stationarity   : {result.kkt_stationarity:.3g}",
        f"active bounds      : {', '.join(result.active_bounds) or 'none'}",
        f"iterations         : {result.iterations}",
        f"starts tried       : {result.starts_tried}",
        f"converged          : {result.converged}",
        f"message            : {result.message}",
    ]
    return "\n".join(lines) + "\n"


def write_trace_csv(result: OptimizationResult, path) -> Path:
    cols = ["iteration", "alpha", "penalty", "merit_before", "merit_after", "objective", "violation",
            "stationarity"]
    return write_csv(path, cols, [[t[c] for c in cols] for t in result.trace])


def write_report(result, space, target, path, obj=None) -> Path:
    return atomic_write_text(path, format_report(result, space, target, obj))
