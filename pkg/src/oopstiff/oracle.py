"""Response oracles: where (U, F, theta) values come from.

Two kinds are provided.  :class:`SyntheticOracle` is a closed-form smooth
benchmark standing in for finite-element runs; :class:`DatasetOracle`
replays results computed elsewhere and loaded from CSV.  Anything with an
``evaluate(x)`` method returning a :class:`SampleRecord` or a
:class:`NonConvergence` can serve as an oracle.

CSV schema: a header with the design-space parameter names followed by
``U,F,theta`` (mm, N, rad); lines starting with ``#`` are comments.  A row
whose outputs are ``nan`` marks a point at which the simulation did not
converge.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from ._io import fmt, write_csv
from .design_space import (
    DesignSpace,
    is_feasible,
    normalize,
    perturb_around,
    reduced_space,
    sobol_sample,
)
from .exceptions import (
    ConfigError,
    DatasetParseError,
    DomainError,
    LookupMissError,
    OracleExhaustedError,
)

OUTPUTS = ("U", "F", "theta")


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One observation: design point plus displacement, force and angle."""

    x: np.ndarray
    U: float
    F: float
    theta: float
    provenance: str = "synthetic"

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        for name in OUTPUTS:
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be a finite non-negative magnitude, got {v}")
            object.__setattr__(self, name, v)

    def value(self, target: str) -> float:
        if target not in OUTPUTS:
            raise DomainError(f"unknown target {target!r}; expected one of {OUTPUTS}")
        return getattr(self, target)

    def __eq__(self, other):
        if not isinstance(other, SampleRecord):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and self.U == other.U and self.F == other.F
                and self.theta == other.theta and self.provenance == other.provenance)

    def __hash__(self):
        return hash((self.x.tobytes(), self.U, self.F, self.theta, self.provenance))


@dataclass(frozen=True)
class NonConvergence:
    x: tuple
    reason: str = "simulation did not converge"


OracleOutcome = Union[SampleRecord, NonConvergence]


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 5
    perturb_scale: float = 0.02

    def __post_init__(self):
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.perturb_scale < 0:
            raise ConfigError("perturb_scale must be >= 0")


@dataclass(frozen=True)
class FailureBall:
    """Region (normalized-coordinate ball) where the oracle reports non-convergence."""

    center: tuple
    radius: float


class FunctionOracle:
    """Oracle from a callable ``func(u) -> (U, F, theta)`` on normalized coordinates.

    ``failure_balls`` are given in physical coordinates for the centre and
    normalized units for the radius.
    """

    provenance = "synthetic"

    def __init__(self, space: DesignSpace, func: Callable[[np.ndarray], Sequence[float]],
                 failure_balls: Sequence[tuple] = ()):
        self.space = space
        self.func = func
        self.failure_balls = tuple(
            FailureBall(tuple(normalize(c, space)), float(r)) for c, r in failure_balls
        )

    def evaluate(self, x) -> OracleOutcome:
        x = np.asarray(x, dtype=float)
        u = normalize(x, self.space)
        for ball in self.failure_balls:
            if np.linalg.norm(u - np.asarray(ball.center)) <= ball.radius:
                return NonConvergence(tuple(map(float, x)), "inside configured failure region")
        U, F, theta = self.func(u)
        return SampleRecord(x, U, F, theta, self.provenance)


class SyntheticOracle(FunctionOracle):
    """Smooth closed-form benchmark for the four learned parameters.

    With ``h, l, t, w`` the normalized H_C, L_A, T_A, W_B::

        theta = 1.25 + 0.8 h + 0.7 l - 0.5 t - 0.5 w + 0.2 h l
        F     = 1.0 + 1.5 w - 0.6 h + 0.3 l w
        U     = 1.0 + 1.2 h - 0.6 w + 0.5 h (1 - w) + 0.2 t

    These are benchmark definitions, not measured physics.  theta rises
    with L_A and falls with T_A; stiffness F/(U+1) rises with W_B and
    falls with H_C.  At theta = 1.5 the stiffest design is
    (h, l, t, w) = (0.05, 1, 0, 1).  Any further parameters in ``space``
    (e.g. the fillet radii) enter theta and F linearly with the small
    weights ``minor_weights``, centred on their medians.
    """

    MAIN = ("H_C", "L_A", "T_A", "W_B")
    DEFAULT_MINOR = {"R_A": 0.004, "R_B": 0.003, "R_C": 0.002, "R_D": 0.03}

    def __init__(self, space: DesignSpace | None = None, failure_balls: Sequence[tuple] = (),
                 minor_weights: Mapping[str, float] | None = None):
        space = reduced_space() if space is None else space
        missing = [n for n in self.MAIN if n not in space.names]
        if missing:
            raise ConfigError(f"synthetic oracle needs parameters {missing}")
        self._idx = [space.index(n) for n in self.MAIN]
        weights = self.DEFAULT_MINOR if minor_weights is None else dict(minor_weights)
        self._minor = [(space.index(n), weights.get(n, 0.0)) for n in space.names if n not in self.MAIN]
        super().__init__(space, self._responses, failure_balls)

    @staticmethod
    def closed_form(h, l, t, w):
        theta = 1.25 + 0.8 * h + 0.7 * l - 0.5 * t - 0.5 * w + 0.2 * h * l
        F = 1.0 + 1.5 * w - 0.6 * h + 0.3 * l * w
        U = 1.0 + 1.2 * h - 0.6 * w + 0.5 * h * (1.0 - w) + 0.2 * t
        return U, F, theta

    def _responses(self, u):
        U, F, theta = self.closed_form(*(u[i] for i in self._idx))
        for i, wt in self._minor:
            theta += wt * (u[i] - 0.5)
            F += 0.5 * wt * (u[i] - 0.5)
        return U, F, theta


class DatasetOracle:
    """Exact lookup table over previously computed responses."""

    provenance = "dataset"

    def __init__(self, records: Sequence[OracleOutcome], space: DesignSpace, rtol: float = 1e-9):
        self.space = space
        self.rtol = rtol
        self.records = list(records)
        if not self.records:
            raise DomainError("dataset oracle needs at least one record")
        pts = np.array([np.asarray(r.x, dtype=float) for r in self.records])
        self._points = pts
        self._tree = cKDTree(pts)

    def evaluate(self, x) -> OracleOutcome:
        x = np.asarray(x, dtype=float)
        for k in (1, min(8, len(self.records))):
            _, idx = self._tree.query(x, k=k)
            for i in np.atleast_1d(idx):
                p = self._points[i]
                if np.all(np.abs(p - x) <= self.rtol * np.maximum(np.abs(p), np.abs(x)) + 1e-300):
                    return self.records[i]
        raise LookupMissError(f"no dataset record matches point {x.tolist()}")


def evaluate_with_retry(oracle, x, space: DesignSpace, policy: RetryPolicy = RetryPolicy(),
                        rng=None) -> SampleRecord:
    """Evaluate, replacing a non-converging point by random neighbours.

    The returned record carries the point that was actually evaluated.
    """
    x = np.asarray(x, dtype=float)
    rng = np.random.default_rng(rng)
    attempted = [x]
    outcome = oracle.evaluate(x)
    for _ in range(policy.max_retries):
        if isinstance(outcome, SampleRecord):
            return outcome
        cand = perturb_around(x, space, policy.perturb_scale, rng)
        attempted.append(cand)
        outcome = oracle.evaluate(cand)
    if isinstance(outcome, SampleRecord):
        return outcome
    raise OracleExhaustedError(
        f"oracle failed to converge at {len(attempted)} points around {x.tolist()}", attempted
    )


def generate_dataset(space: DesignSpace, oracle, n: int, policy: RetryPolicy = RetryPolicy(),
                     skip: int = 1, seed: int = 0) -> list[SampleRecord]:
    """Sobol-sample ``n`` feasible points and evaluate each (with retries)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return [evaluate_with_retry(oracle, x, space, policy, rng) for x in sobol_sample(space, n, skip)]


def write_dataset(records: Sequence[SampleRecord], path, space: DesignSpace,
                  metadata: Mapping[str, str] | None = None) -> Path:
    comments = [f"{k}: {v}" for k, v in (metadata or {}).items()]
    rows = [[fmt(v) for v in r.x] + [fmt(r.U), fmt(r.F), fmt(r.theta)] for r in records]
    return write_csv(path, space.names + list(OUTPUTS), rows, comments)


def load_dataset(path, space: DesignSpace, rtol: float = 1e-9):
    """Read a results CSV.

    Returns ``(records, warnings)``.  Rows with ``nan`` outputs come back as
    :class:`NonConvergence`; infeasible rows are kept but reported in
    ``warnings``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    needed = space.names + list(OUTPUTS)
    records: list[OracleOutcome] = []
    warnings: list[str] = []
    header = None
    lines = []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            lines.append((lineno, line))
    reader = csv.reader([ln for _, ln in lines])
    cols = None
    for (lineno, _), row in zip(lines, reader):
        row = [c.strip() for c in row]
        if header is None:
            header = row
            missing = [c for c in needed if c not in header]
            if missing:
                raise DatasetParseError(f"{path}: header lacks column(s) {missing}")
            extra = [c for c in header if c not in needed]
            if extra:
                warnings.append(f"ignoring unknown column(s) {extra}")
            cols = [header.index(c) for c in needed]
            continue
        if len(row) != len(header):
            raise DatasetParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            vals = [float(row[i]) for i in cols]
        except ValueError:
            bad = next(needed[j] for j, i in enumerate(cols) if not _is_float(row[i]))
            raise DatasetParseError(f"{path}:{lineno}: non-numeric value in column {bad!r}") from None
        x = np.array(vals[: space.dim])
        out = vals[space.dim:]
        if not np.all(np.isfinite(x)):
            raise DatasetParseError(f"{path}:{lineno}: non-finite design parameter")
        if all(math.isnan(v) for v in out):
            rec = NonConvergence(tuple(map(float, x)), f"marked non-converged at line {lineno}")
        else:
            try:
                rec = SampleRecord(x, *out, provenance="dataset")
            except DomainError as exc:
                raise DatasetParseError(f"{path}:{lineno}: {exc}") from None
        if not is_feasible(x, space):
            warnings.append(f"line {lineno}: point {x.tolist()} is outside the feasible region")
        records.append(rec)
    if header is None:
        raise DatasetParseError(f"{path}: empty file")
    if len(records) > 1:
        pts = np.array([np.asarray(r.x, dtype=float) for r in records])
        scale = np.maximum(np.abs(pts).max(axis=0), 1e-300)
        pairs = cKDTree(pts / scale).query_pairs(rtol * 2)
        for i, j in sorted(pairs):
            if np.all(np.abs(pts[i] - pts[j]) <= rtol * np.maximum(np.abs(pts[i]), np.abs(pts[j]))):
                raise DatasetParseError(f"{path}: duplicate design point in data rows {i + 1} and {j + 1}")
    return records, warnings


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False
