"""Thin-plate-spline RBF metamodels with a linear polynomial tail.

A model over normalized coordinates ``u`` reads

    s(u) = p0 + p[1:] . u + sum_j w_j phi(|u - c_j|),    phi(r) = r^2 ln r

with one centre per training sample.  Weights and tail coefficients solve
the symmetric saddle system

    [[Phi + lam I, K], [K^T, 0]] [w; p] = [y; 0],    K = [1, u_j],

whose lower block row is the compatibility condition ``K^T w = 0``.
Distances are measured in the unit cube so parameters with short physical
ranges are not drowned out by long ones.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import lapack
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist, squareform

from ._io import atomic_write_text
from .design_space import DesignSpace, ParameterDef, StrictLinearConstraint
from .exceptions import (
    DegenerateGeometryError,
    DomainError,
    IllConditionedError,
    InsufficientDataError,
    LinearAlgebraError,
    ModelFormatError,
)

DUPLICATE_TOL = 1e-8
CONDITION_WARN = 1e12
_CHUNK = 1024


class ConditioningWarning(RuntimeWarning):
    pass


class ExtrapolationWarning(UserWarning):
    pass


def kernel_value(r):
    """``r**2 * ln(r)``, continuous at 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("kernel radius must be non-negative")
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = rp * rp * np.log(rp)
    return out[()] if out.ndim == 0 else out


def kernel_gradient_factor(r):
    """``g(r) = 2 ln r + 1`` so that grad phi(|x - c|) = g(r) (x - c); 0 at r = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("kernel radius must be non-negative")
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = 2.0 * np.log(r[pos]) + 1.0
    return out[()] if out.ndim == 0 else out


KERNELS = {"thin_plate": (kernel_value, kernel_gradient_factor)}


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "thin_plate"
    smoothing: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise DomainError(f"unknown kernel {self.kind!r}; available: {sorted(KERNELS)}")
        if not self.smoothing >= 0:
            raise DomainError("smoothing must be >= 0")


class RbfSurrogate:
    """A fitted metamodel; immutable after construction."""

    def __init__(self, space: DesignSpace, centers, weights, poly, kernel: KernelSpec = KernelSpec(),
                 target: str = "", rcond: float | None = None):
        self.space = space
        self.centers = np.array(centers, dtype=float)
        self.weights = np.array(weights, dtype=float)
        self.poly = np.array(poly, dtype=float)
        for a in (self.centers, self.weights, self.poly):
            a.setflags(write=False)
        self.kernel = kernel
        self.target = target
        self.rcond = rcond
        n, d = self.centers.shape
        if self.weights.shape != (n,) or self.poly.shape != (d + 1,) or d != space.dim:
            raise DomainError("inconsistent surrogate array shapes")
        self._lo = space.lower
        self._span = space.span
        self._phi, self._gfac = KERNELS[kernel.kind]

    def __repr__(self):
        return (f"RbfSurrogate(target={self.target!r}, n={len(self.weights)}, d={self.space.dim}, "
                f"kernel={self.kernel.kind}, smoothing={self.kernel.smoothing})")

    def to_unit(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (x - self._lo) / self._span
        if np.any((u < 0) | (u > 1)):
            warnings.warn("evaluating the surrogate outside its design box", ExtrapolationWarning,
                          stacklevel=3)
        return u

    def predict_unit(self, u):
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        U = np.atleast_2d(u)
        out = np.empty(len(U))
        for s in range(0, len(U), _CHUNK):
            blk = U[s:s + _CHUNK]
            r = cdist(blk, self.centers)
            out[s:s + _CHUNK] = self.poly[0] + blk @ self.poly[1:] + self._phi(r) @ self.weights
        return out[0] if single else out

    def gradient_unit(self, u):
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        U = np.atleast_2d(u)
        out = np.empty_like(U)
        for s in range(0, len(U), _CHUNK):
            blk = U[s:s + _CHUNK]
            r = cdist(blk, self.centers)
            gw = self._gfac(r) * self.weights
            # sum_j gw_j (u - c_j) = u * sum_j gw_j - gw @ C
            out[s:s + _CHUNK] = self.poly[1:] + blk * gw.sum(axis=1)[:, None] - gw @ self.centers
        return out[0] if single else out

    def predict(self, x):
        """Value at physical point(s) ``x``."""
        return self.predict_unit(self.to_unit(x))

    def gradient(self, x):
        """Gradient with respect to physical coordinates."""
        return self.gradient_unit(self.to_unit(x)) / self._span


class SurrogateTriple(NamedTuple):
    U: RbfSurrogate
    F: RbfSurrogate
    theta: RbfSurrogate


def _unit_centers(samples, space):
    from .oracle import SampleRecord

    bad = [i for i, s in enumerate(samples) if not isinstance(s, SampleRecord)]
    if bad:
        raise DomainError(f"samples {bad[:5]} are not converged SampleRecords")
    X = np.array([s.x for s in samples], dtype=float).reshape(len(samples), -1)
    if X.shape[1] != space.dim:
        raise DomainError(f"sample dimension {X.shape[1]} does not match space dimension {space.dim}")
    return (X - space.lower) / space.span


def solve_saddle(centers: np.ndarray, Y: np.ndarray, kernel: KernelSpec = KernelSpec()):
    """Solve the interpolation saddle system for one or more right-hand sides.

    Returns ``(W, P, rcond)`` with ``W`` of shape (n, k), ``P`` of shape
    (d+1, k) and ``rcond`` the LAPACK reciprocal condition estimate.
    """
    C = np.asarray(centers, dtype=float)
    n, d = C.shape
    Y = np.asarray(Y, dtype=float).reshape(n, -1)
    if n < d + 2:
        raise InsufficientDataError(f"need at least d+2 = {d + 2} samples, got {n}")
    pairs = cKDTree(C).query_pairs(DUPLICATE_TOL)
    if pairs:
        i, j = min(pairs)
        raise IllConditionedError(
            f"samples {i} and {j} coincide within {DUPLICATE_TOL:g} in normalized coordinates",
            pair=(i, j),
        )
    K = np.hstack([np.ones((n, 1)), C])
    if np.linalg.matrix_rank(K) < d + 1:
        raise DegenerateGeometryError(
            "sample centres lie on a common hyperplane; the linear tail is not determined"
        )
    phi = KERNELS[kernel.kind][0]
    m = n + d + 1
    A = np.zeros((m, m))
    A[:n, :n] = squareform(phi(pdist(C)))
    A[:n, :n][np.diag_indices(n)] += kernel.smoothing
    A[:n, n:] = K
    A[n:, :n] = K.T
    rhs = np.zeros((m, Y.shape[1]))
    rhs[:n] = Y
    anorm = np.abs(A).sum(axis=0).max()
    ldu, ipiv, info = lapack.dsytrf(A, lower=1)
    if info != 0:
        raise LinearAlgebraError(f"symmetric indefinite factorization failed (info={info})", condition=np.inf)
    rcond, info = lapack.dsycon(ldu, ipiv, anorm, lower=1)
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond):
        raise LinearAlgebraError("saddle system is numerically singular", condition=cond)
    if cond > CONDITION_WARN:
        warnings.warn(
            f"saddle system condition estimate {cond:.3g} exceeds {CONDITION_WARN:g}; "
            "consider smoothing > 0",
            ConditioningWarning,
            stacklevel=3,
        )
    sol, info = lapack.dsytrs(ldu, ipiv, rhs, lower=1)
    if info != 0:
        raise LinearAlgebraError(f"triangular solve failed (info={info})", condition=cond)
    # one step of iterative refinement
    corr, _ = lapack.dsytrs(ldu, ipiv, rhs - A @ sol, lower=1)
    sol = sol + corr
    if not np.all(np.isfinite(sol)):
        raise LinearAlgebraError("non-finite solution of the saddle system", condition=cond)
    return sol[:n], sol[n:], float(rcond)


def fit(samples: Sequence, target: str, space: DesignSpace, kernel: KernelSpec = KernelSpec()) -> RbfSurrogate:
    """Fit one output (``"U"``, ``"F"`` or ``"theta"``) with collocated centres."""
    C = _unit_centers(samples, space)
    y = np.array([s.value(target) for s in samples])
    W, P, rcond = solve_saddle(C, y, kernel)
    return RbfSurrogate(space, C, W[:, 0], P[:, 0], kernel, target, rcond)


def fit_triple(samples: Sequence, space: DesignSpace, kernel: KernelSpec = KernelSpec()) -> SurrogateTriple:
    """Fit U, F and theta on shared centres with a single factorization."""
    C = _unit_centers(samples, space)
    Y = np.array([[s.U, s.F, s.theta] for s in samples]).reshape(len(samples), 3)
    W, P, rcond = solve_saddle(C, Y, kernel)
    C.setflags(write=False)
    models = [RbfSurrogate(space, C, W[:, k], P[:, k], kernel, t, rcond)
              for k, t in enumerate(("U", "F", "theta"))]
    return SurrogateTriple(*models)


# --- serialization -------------------------------------------------------

_MAGIC = "oopstiff-rbf 1"


def _g(v):
    return "%.17g" % v


def dumps_model(model: RbfSurrogate) -> str:
    sp = model.space
    n, d = model.centers.shape
    lines = [
        _MAGIC,
        f"target {model.target or '-'}",
        f"kernel {model.kernel.kind}",
        f"smoothing {_g(model.kernel.smoothing)}",
        f"dim {d}",
        f"count {n}",
    ]
    for p in sp.parameters:
        lines.append(f"parameter {p.name} {_g(p.lower)} {_g(p.upper)} {p.unit} "
                     f"{int(p.lower_strict)} {int(p.upper_strict)}")
    for c in sp.constraints:
        terms = " ".join(f"{k}:{_g(v)}" for k, v in c.coefficients.items())
        lines.append(f"constraint {c.label or '-'} {terms} < {_g(c.bound)}")
    for k, v in sp.frozen.items():
        lines.append(f"frozen {k} {_g(v)}")
    lines.append("centers")
    lines.extend(" ".join(_g(v) for v in row) for row in model.centers)
    lines.append("weights")
    lines.extend(_g(v) for v in model.weights)
    lines.append("poly")
    lines.append(" ".join(_g(v) for v in model.poly))
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> RbfSurrogate:
    try:
        return _loads_model(text)
    except ModelFormatError:
        raise
    except (StopIteration, KeyError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model file ({type(exc).__name__}: {exc})") from None


def _loads_model(text: str) -> RbfSurrogate:
    it = iter(text.splitlines())
    if next(it, "").strip() != _MAGIC:
        raise ModelFormatError("not an oopstiff RBF model file")
    head = {}
    params, cons, frozen = [], [], {}
    for line in it:
        key, _, rest = line.partition(" ")
        if key == "centers":
            break
        if key == "parameter":
            name, lo, hi, unit, ls, us = rest.split()
            params.append(ParameterDef(name, float(lo), float(hi), unit, ls == "1", us == "1"))
        elif key == "constraint":
            label, _, body = rest.partition(" ")
            lhs, rhs = body.rsplit("<", 1)
            coefs = {t.split(":")[0]: float(t.split(":")[1]) for t in lhs.split()}
            cons.append(StrictLinearConstraint(coefs, float(rhs), "" if label == "-" else label))
        elif key == "frozen":
            name, val = rest.split()
            frozen[name] = float(val)
        else:
            head[key] = rest.strip()
    n, d = int(head["count"]), int(head["dim"])
    centers = np.array([[float(v) for v in next(it).split()] for _ in range(n)]).reshape(n, d)
    if next(it).strip() != "weights":
        raise ModelFormatError("malformed model file: expected 'weights'")
    weights = np.array([float(next(it)) for _ in range(n)])
    if next(it).strip() != "poly":
        raise ModelFormatError("malformed model file: expected 'poly'")
    poly = np.array([float(v) for v in next(it).split()])
    space = DesignSpace(tuple(params), tuple(cons), frozen)
    kernel = KernelSpec(head["kernel"], float(head["smoothing"]))
    target = "" if head.get("target") == "-" else head.get("target", "")
    return RbfSurrogate(space, centers, weights, poly, kernel, target)


def save_model(model: RbfSurrogate, path) -> Path:
    return atomic_write_text(path, dumps_model(model))


def load_model(path) -> RbfSurrogate:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return loads_model(path.read_text())
