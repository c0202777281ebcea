"""Constrained parametric design spaces.

A design space is an ordered box of named parameters plus a list of strict
linear constraints ``a . x < b``.  Points are plain 1-D float arrays in
physical units (mm) ordered like ``DesignSpace.names``; batches are 2-D
arrays with one point per row.
"""
from __future__ import annotations

import configparser
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from .exceptions import (
    ConfigError,
    DomainError,
    PerturbationFailedError,
    SamplingExhaustedError,
)

__all__ = [
    "ParameterDef",
    "StrictLinearConstraint",
    "DesignSpace",
    "normalize",
    "denormalize",
    "is_feasible",
    "sobol_sample",
    "sobol_sample_with_stats",
    "perturb_around",
    "reduced_space",
    "full_space",
    "load_space",
    "parse_space",
    "dump_space",
]


@dataclass(frozen=True)
class ParameterDef:
    """One box-bounded design parameter.

    ``lower_strict``/``upper_strict`` mark open ends (``<`` rather than
    ``<=``).  Open ends matter only for feasibility; normalization maps the
    closed interval onto [0, 1].
    """

    name: str
    lower: float
    upper: float
    unit: str = "mm"
    lower_strict: bool = False
    upper_strict: bool = False

    def __post_init__(self):
        if not self.name.isidentifier():
            raise ConfigError(f"parameter name {self.name!r} is not an identifier")
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ConfigError(f"parameter {self.name}: bounds must be finite")
        if not self.lower < self.upper:
            raise ConfigError(
                f"parameter {self.name}: lower ({self.lower}) must be < upper ({self.upper})"
            )

    @property
    def span(self) -> float:
        return self.upper - self.lower

    @property
    def median(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class StrictLinearConstraint:
    """``sum(coefficients[name] * x[name]) < bound``."""

    coefficients: Mapping[str, float]
    bound: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", {k: float(v) for k, v in dict(self.coefficients).items()}
        )
        if not any(v != 0.0 for v in self.coefficients.values()):
            raise ConfigError("linear constraint needs at least one nonzero coefficient")

    def __hash__(self):
        return hash((tuple(sorted(self.coefficients.items())), self.bound, self.label))

    def describe(self) -> str:
        terms = " ".join(f"{k}:{v:g}" for k, v in self.coefficients.items())
        return f"{terms} < {self.bound:g}"


@dataclass(frozen=True)
class DesignSpace:
    """Ordered parameters plus strict linear constraints.

    ``frozen`` records parameters that were removed by dimension reduction
    and the value they are held at; it never affects sampling.
    """

    parameters: tuple[ParameterDef, ...]
    constraints: tuple[StrictLinearConstraint, ...] = ()
    frozen: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "frozen", dict(self.frozen))
        if not self.parameters:
            raise ConfigError("a design space needs at least one parameter")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate parameter names in {names}")
        for con in self.constraints:
            unknown = set(con.coefficients) - set(names)
            if unknown:
                raise ConfigError(
                    f"constraint {con.describe()!r} references undeclared parameters {sorted(unknown)}"
                )
        lo = np.array([p.lower for p in self.parameters])
        hi = np.array([p.upper for p in self.parameters])
        a = np.array([[c.coefficients.get(n, 0.0) for n in names] for c in self.constraints])
        object.__setattr__(self, "_lower", lo)
        object.__setattr__(self, "_upper", hi)
        object.__setattr__(self, "_A", a.reshape(len(self.constraints), len(names)))
        object.__setattr__(self, "_b", np.array([c.bound for c in self.constraints]))

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.parameters]

    @property
    def dim(self) -> int:
        return len(self.parameters)

    @property
    def lower(self) -> np.ndarray:
        return self._lower.copy()

    @property
    def upper(self) -> np.ndarray:
        return self._upper.copy()

    @property
    def span(self) -> np.ndarray:
        return self._upper - self._lower

    @property
    def median(self) -> np.ndarray:
        return 0.5 * (self._lower + self._upper)

    @property
    def constraint_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, b)`` with one row per strict constraint ``A x < b``."""
        return self._A.copy(), self._b.copy()

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DomainError(f"unknown parameter {name!r}; space has {self.names}") from None

    def parameter(self, name: str) -> ParameterDef:
        return self.parameters[self.index(name)]

    def as_dict(self, x) -> dict[str, float]:
        """Point as a name->value mapping, frozen parameters included."""
        x = np.asarray(x, dtype=float)
        out = dict(self.frozen)
        out.update(zip(self.names, map(float, x)))
        return out

    def restrict(self, keep: Sequence[str], values: Mapping[str, float] | None = None) -> "DesignSpace":
        """Sub-space over ``keep`` with every other parameter frozen.

        Frozen parameters default to their medians.  Constraint terms on
        frozen parameters are folded into the bound; constraints left with
        no free parameter are dropped if satisfied and rejected otherwise.
        """
        values = dict(values or {})
        keep = list(keep)
        for k in keep:
            self.index(k)
        dropped = {p.name: float(values.get(p.name, p.median)) for p in self.parameters if p.name not in keep}
        params = [p for p in self.parameters if p.name in keep]
        cons = []
        for con in self.constraints:
            free = {k: v for k, v in con.coefficients.items() if k in keep and v != 0.0}
            shift = sum(v * dropped[k] for k, v in con.coefficients.items() if k in dropped)
            if free:
                cons.append(StrictLinearConstraint(free, con.bound - shift, con.label))
            elif not shift < con.bound:
                raise DomainError(f"frozen values violate constraint {con.describe()!r}")
        frozen = dict(self.frozen)
        frozen.update(dropped)
        return DesignSpace(tuple(params), tuple(cons), frozen)


def _as_points(x, d):
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != d:
        raise DomainError(f"expected points of dimension {d}, got shape {arr.shape}")
    return arr


def normalize(point, space: DesignSpace) -> np.ndarray:
    """Map physical coordinates onto the unit cube."""
    x = _as_points(point, space.dim)
    lo, hi = space._lower, space._upper
    bad = (x < lo) | (x > hi) | ~np.isfinite(x)
    if np.any(bad):
        cols = np.nonzero(np.atleast_2d(bad).any(axis=0))[0]
        names = [space.names[i] for i in cols]
        raise DomainError(f"point outside the design box in parameter(s) {names}")
    return (x - lo) / (hi - lo)


def denormalize(u, space: DesignSpace) -> np.ndarray:
    """Inverse of :func:`normalize`."""
    u = _as_points(u, space.dim)
    bad = (u < 0.0) | (u > 1.0) | ~np.isfinite(u)
    if np.any(bad):
        cols = np.nonzero(np.atleast_2d(bad).any(axis=0))[0]
        raise DomainError(
            f"unit-cube coordinate outside [0, 1] in parameter(s) {[space.names[i] for i in cols]}"
        )
    return space._lower + u * (space._upper - space._lower)


def _feasible_mask(x: np.ndarray, space: DesignSpace) -> np.ndarray:
    x = np.atleast_2d(x)
    ok = np.all(np.isfinite(x), axis=1)
    for i, p in enumerate(space.parameters):
        col = x[:, i]
        ok &= (col > p.lower) if p.lower_strict else (col >= p.lower)
        ok &= (col < p.upper) if p.upper_strict else (col <= p.upper)
    if len(space.constraints):
        ok &= np.all(x @ space._A.T < space._b, axis=1)
    return ok


def is_feasible(point, space: DesignSpace):
    """Box bounds (open or closed per parameter) and strict linear constraints.

    Returns a bool for a single point, a boolean array for a batch.
    """
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != space.dim:
        return False if x.ndim == 1 else np.zeros(x.shape[0], dtype=bool)
    mask = _feasible_mask(x, space)
    return bool(mask[0]) if x.ndim == 1 else mask


def sobol_sample_with_stats(space: DesignSpace, n: int, skip: int = 1, budget: int | None = None,
                            scramble_seed: int | None = None) -> tuple[np.ndarray, int]:
    """Like :func:`sobol_sample` but also returns the raw stream length consumed."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if skip < 0:
        raise DomainError("skip must be >= 0")
    if budget is None:
        budget = max(1024, 100 * n)
    scramble = scramble_seed is not None
    engine = qmc.Sobol(space.dim, scramble=scramble, seed=scramble_seed)
    if skip:
        engine.fast_forward(skip)
    taken = []
    found = 0
    consumed = 0
    chunk = max(64, n)
    with warnings.catch_warnings():
        # Balance-property warnings for non power-of-two draws are irrelevant here.
        warnings.simplefilter("ignore", UserWarning)
        while found < n:
            m = min(chunk, budget - consumed)
            if m <= 0:
                raise SamplingExhaustedError(
                    f"only {found} of {n} feasible points within a budget of {budget} Sobol points"
                )
            raw = denormalize(engine.random(m), space)
            mask = _feasible_mask(raw, space)
            idx = np.nonzero(mask)[0]
            need = n - found
            if len(idx) >= need:
                consumed += int(idx[need - 1]) + 1
                taken.append(raw[idx[:need]])
                found = n
            else:
                consumed += m
                taken.append(raw[idx])
                found += len(idx)
    return np.concatenate(taken, axis=0), consumed


def sobol_sample(space: DesignSpace, n: int, skip: int = 1, budget: int | None = None,
                 scramble_seed: int | None = None) -> np.ndarray:
    """Return ``n`` feasible points from the Sobol stream, in stream order.

    Infeasible mapped points are discarded and the stream advanced until
    ``n`` feasible points accumulate.  ``skip=1`` drops the all-zeros first
    point.  ``budget`` caps the raw points examined (default
    ``max(1024, 100 n)``).  The default unscrambled stream uses scipy's
    Joe-Kuo direction numbers; ``scramble_seed`` switches to an Owen
    scrambled stream.
    """
    return sobol_sample_with_stats(space, n, skip, budget, scramble_seed)[0]


def perturb_around(point, space: DesignSpace, scale: float = 0.02, rng=None,
                   max_tries: int = 100) -> np.ndarray:
    """Feasible Gaussian neighbour of ``point``.

    Each component gets an independent N(0, (scale * span)^2) offset, the
    result is clamped to the box, and the whole point is redrawn until it
    is feasible.
    """
    x = np.asarray(point, dtype=float)
    if scale < 0:
        raise DomainError("scale must be >= 0")
    if scale == 0:
        return x.copy()
    rng = np.random.default_rng(rng)
    sd = scale * space.span
    for _ in range(max_tries):
        cand = np.clip(x + rng.normal(0.0, sd), space._lower, space._upper)
        if is_feasible(cand, space):
            return cand
    raise PerturbationFailedError(
        f"no feasible perturbation of {x.tolist()} after {max_tries} draws (scale={scale})"
    )


def reduced_space() -> DesignSpace:
    """The four-parameter space (H_C, L_A, T_A, W_B) used for learning."""
    return DesignSpace(
        (
            ParameterDef("H_C", 8.0, 30.0),
            ParameterDef("L_A", 2.0, 10.0, upper_strict=True),
            ParameterDef("T_A", 1.0, 2.0),
            ParameterDef("W_B", 14.0, 30.0),
        ),
        (StrictLinearConstraint({"T_A": 2.0, "L_A": -1.0}, 0.0, "wall_vs_length"),),
    )


def full_space() -> DesignSpace:
    """The initial eight-parameter chamber model used for sensitivity sweeps."""
    return DesignSpace(
        (
            ParameterDef("H_C", 9.0, 25.0),
            ParameterDef("L_A", 2.8, 10.0),
            ParameterDef("R_A", 0.0, 1.8),
            ParameterDef("R_B", 0.0, 1.8),
            ParameterDef("R_C", 0.0, 1.8),
            ParameterDef("R_D", 0.0, 1.8),
            ParameterDef("T_A", 1.0, 2.0),
            ParameterDef("W_B", 14.0, 30.0),
        ),
        (StrictLinearConstraint({"T_A": 2.0, "L_A": -1.0}, 0.0, "wall_vs_length"),),
    )


# --- configuration files -------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _flag(section, key, default=False):
    raw = section.get(key, str(default)).strip().lower()
    if raw in _TRUE:
        return True
    if raw in _FALSE:
        return False
    raise ConfigError(f"[{section.name}] {key}: expected a boolean, got {raw!r}")


def parse_constraint(text: str, label: str = "") -> StrictLinearConstraint:
    """Parse ``"T_A:2 L_A:-1 < 0"``."""
    if "<" not in text:
        raise ConfigError(f"constraint {label!r}: expected '<coefficients> < <bound>'")
    lhs, rhs = text.rsplit("<", 1)
    coefs = {}
    for tok in lhs.split():
        name, sep, val = tok.partition(":")
        if not sep:
            raise ConfigError(f"constraint {label!r}: term {tok!r} is not name:coefficient")
        try:
            coefs[name] = coefs.get(name, 0.0) + float(val)
        except ValueError:
            raise ConfigError(f"constraint {label!r}: bad coefficient {val!r}") from None
    try:
        bound = float(rhs)
    except ValueError:
        raise ConfigError(f"constraint {label!r}: bad bound {rhs.strip()!r}") from None
    return StrictLinearConstraint(coefs, bound, label)


def space_from_config(cp: configparser.ConfigParser) -> DesignSpace:
    params = []
    for sec in cp.sections():
        if not sec.startswith("parameter "):
            continue
        s = cp[sec]
        name = sec.split(None, 1)[1].strip()
        try:
            lower, upper = float(s["lower"]), float(s["upper"])
        except KeyError as exc:
            raise ConfigError(f"[{sec}] missing key {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
        params.append(ParameterDef(name, lower, upper, s.get("unit", "mm"),
                                   _flag(s, "lower_strict"), _flag(s, "upper_strict")))
    cons = []
    if cp.has_section("constraints"):
        for label, text in cp["constraints"].items():
            cons.append(parse_constraint(text, label))
    if not params:
        raise ConfigError("no [parameter NAME] sections found")
    return DesignSpace(tuple(params), tuple(cons))


def parse_space(text: str) -> DesignSpace:
    """Build a space from configuration text (see ``dump_space``)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return space_from_config(cp)


def load_space(path) -> DesignSpace:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"design-space file not found: {path}")
    return parse_space(path.read_text())


def dump_space(space: DesignSpace) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for p in space.parameters:
        sec = {"lower": repr(p.lower), "upper": repr(p.upper), "unit": p.unit}
        if p.lower_strict:
            sec["lower_strict"] = "true"
        if p.upper_strict:
            sec["upper_strict"] = "true"
        cp[f"parameter {p.name}"] = sec
    if space.constraints:
        cp["constraints"] = {
            (c.label or f"c{i}"): " ".join(f"{k}:{v!r}" for k, v in c.coefficients.items())
            + f" < {c.bound!r}"
            for i, c in enumerate(space.constraints)
        }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
