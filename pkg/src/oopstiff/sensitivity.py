"""One-at-a-time sensitivity sweeps and dimension reduction.

Each parameter is swept over its range with all others held at a baseline
(the box median by default).  Polynomials fitted to the sweep curves give a
sensitivity score: the largest slope magnitude with respect to the fraction
of range ``u`` in [0, 1].  Scores are therefore unit-free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ._io import write_csv
from .design_space import DesignSpace, is_feasible
from .exceptions import DomainError, InsufficientDataError, TieError
from .oracle import SampleRecord

__all__ = [
    "SweepResult",
    "SensitivityReport",
    "one_at_a_time_sweep",
    "fit_sweep_polynomial",
    "max_gradient_magnitude",
    "rank_and_reduce",
    "sensitivity_study",
    "write_report_csv",
    "write_sweep_csvs",
]


@dataclass
class SweepResult:
    parameter: str
    fractions: np.ndarray
    values: np.ndarray
    theta_values: np.ndarray
    stiffness_values: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def series(self, which: str) -> np.ndarray:
        if which == "theta":
            return self.theta_values
        if which in ("ko", "k_o", "stiffness"):
            return self.stiffness_values
        raise DomainError(f"unknown sweep series {which!r}; use 'theta' or 'ko'")


@dataclass
class SensitivityReport:
    parameters: list[str]
    theta_sensitivity: np.ndarray
    ko_sensitivity: np.ndarray
    scores: np.ndarray
    retained: list[str]
    frozen: dict[str, float]

    @property
    def ranking(self) -> list[str]:
        order = np.argsort(-self.scores, kind="stable")
        return [self.parameters[i] for i in order]


def one_at_a_time_sweep(space: DesignSpace, oracle, parameter: str, points: int = 9,
                        epsilon: float = 1.0, baseline=None) -> SweepResult:
    """Vary ``parameter`` over ``points`` uniform fractions of its range.

    Infeasible sweep points and non-converged evaluations are left as NaN
    gaps and noted in ``warnings``.
    """
    if points < 2:
        raise DomainError("a sweep needs at least 2 points")
    i = space.index(parameter)
    base = space.median if baseline is None else np.asarray(baseline, dtype=float).copy()
    if not is_feasible(base, space):
        raise DomainError(f"sweep baseline {base.tolist()} is infeasible")
    fr = np.linspace(0.0, 1.0, points)
    p = space.parameters[i]
    vals = p.lower + fr * p.span
    theta = np.full(points, np.nan)
    ko = np.full(points, np.nan)
    notes = []
    for k, v in enumerate(vals):
        x = base.copy()
        x[i] = v
        if not is_feasible(x, space):
            notes.append(f"{parameter}={v:g}: infeasible sweep point skipped")
            continue
        out = oracle.evaluate(x)
        if not isinstance(out, SampleRecord):
            notes.append(f"{parameter}={v:g}: {out.reason}")
            continue
        theta[k] = out.theta
        ko[k] = out.F / (out.U + epsilon)
    return SweepResult(parameter, fr, vals, theta, ko, notes)


def fit_sweep_polynomial(sweep: SweepResult, which: str = "theta", degree: int = 4) -> np.ndarray:
    """Least-squares polynomial in the range fraction, lowest order first."""
    y = sweep.series(which)
    ok = np.isfinite(y)
    if ok.sum() < degree + 1:
        raise InsufficientDataError(
            f"{sweep.parameter}: {ok.sum()} valid points cannot determine a degree-{degree} polynomial"
        )
    return P.polyfit(sweep.fractions[ok], y[ok], degree)


def max_gradient_magnitude(coefs) -> float:
    """max |p'(u)| over [0, 1] (1001-point grid plus stationary points of p')."""
    d1 = P.polyder(np.asarray(coefs, dtype=float))
    cand = np.linspace(0.0, 1.0, 1001)
    if len(d1) > 1:
        d2 = P.polyder(d1)
        if np.any(d2 != 0):
            roots = P.polyroots(d2)
            real = roots[np.abs(roots.imag) < 1e-12].real
            cand = np.concatenate([cand, real[(real >= 0) & (real <= 1)]])
    return float(np.max(np.abs(P.polyval(cand, d1))))


def _sensitivity(sweep, which, degree):
    coefs = fit_sweep_polynomial(sweep, which, degree)
    y = sweep.series(which)
    y = y[np.isfinite(y)]
    if np.all(y == y[0]):
        # exactly flat curve; avoid round-off slopes from the least-squares fit
        return 0.0
    return max_gradient_magnitude(coefs)


def _normalized(v):
    top = np.max(v) if len(v) else 0.0
    return v / top if top > 0 else np.zeros_like(v)


def rank_and_reduce(sweeps: Sequence[SweepResult], space: DesignSpace, keep: int,
                    degree: int = 4, baseline=None):
    """Score each swept parameter and keep the ``keep`` most influential ones.

    A parameter's score is the larger of its theta and stiffness
    sensitivities, each divided by the largest value over all parameters.
    Returns ``(reduced_space, report)``; dropped parameters are frozen at
    the baseline (default: median).  A tie straddling the cut raises
    :class:`TieError`.
    """
    names = [s.parameter for s in sweeps]
    if sorted(names) != sorted(space.names) or len(set(names)) != len(names):
        raise DomainError("need exactly one sweep per design-space parameter")
    if not 1 <= keep <= len(names):
        raise DomainError(f"keep must be in [1, {len(names)}]")
    # report in space order regardless of sweep order
    by_name = {s.parameter: s for s in sweeps}
    sweeps = [by_name[n] for n in space.names]
    ts = np.array([_sensitivity(s, "theta", degree) for s in sweeps])
    ks = np.array([_sensitivity(s, "ko", degree) for s in sweeps])
    scores = np.maximum(_normalized(ts), _normalized(ks))
    order = np.argsort(-scores, kind="stable")
    if keep < len(names):
        a, b = scores[order[keep - 1]], scores[order[keep]]
        if math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-15):
            tied = [space.names[i] for i in order if math.isclose(scores[i], a, rel_tol=1e-9, abs_tol=1e-15)]
            raise TieError(f"scores tie at the cut between {tied}; choose the retained set explicitly")
    retained = [space.names[i] for i in order[:keep]]
    base = space.median if baseline is None else np.asarray(baseline, dtype=float)
    keep_in_order = [n for n in space.names if n in retained]
    values = {n: float(base[space.index(n)]) for n in space.names if n not in retained}
    reduced = space if keep == len(names) else space.restrict(keep_in_order, values)
    report = SensitivityReport(space.names, ts, ks, scores, retained, values)
    return reduced, report


def sensitivity_study(space: DesignSpace, oracle, keep: int, points: int = 9, degree: int = 4,
                      epsilon: float = 1.0, baseline=None):
    """Sweep every parameter, then :func:`rank_and_reduce`.

    Returns ``(reduced_space, report, sweeps)``.
    """
    sweeps = [one_at_a_time_sweep(space, oracle, n, points, epsilon, baseline) for n in space.names]
    reduced, report = rank_and_reduce(sweeps, space, keep, degree, baseline)
    return reduced, report, sweeps


def write_report_csv(report: SensitivityReport, path) -> Path:
    rows = [
        [n, float(report.theta_sensitivity[i]), float(report.ko_sensitivity[i]),
         float(report.scores[i]), int(n in report.retained)]
        for i, n in enumerate(report.parameters)
    ]
    return write_csv(path, ["parameter", "theta_sensitivity", "ko_sensitivity", "score", "retained"], rows)


def write_sweep_csvs(sweeps: Sequence[SweepResult], out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for s in sweeps:
        rows = [[float(f), float(v), float(t), float(k)]
                for f, v, t, k in zip(s.fractions, s.values, s.theta_values, s.stiffness_values)]
        paths.append(write_csv(out_dir / f"sweep_{s.parameter}.csv",
                               ["fraction", s.parameter, "theta", "k_o"], rows,
                               comments=s.warnings))
    return paths
