"""Hold-out validation of the surrogates and learning-curve studies.

The error metric is the coefficient of variation of the residuals,
``std(pred - actual) / mean(actual)`` with the population (1/n) standard
deviation.  A constant bias therefore scores zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import write_csv
from .design_space import DesignSpace
from .exceptions import OopstiffError, SplitError, UndefinedMetricError
from .oracle import OUTPUTS, RetryPolicy, generate_dataset
from .surrogate import KernelSpec, SurrogateTriple, fit_triple


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise SplitError("train_fraction must lie strictly between 0 and 1")


@dataclass
class ErrorReport:
    sigma: dict
    mu: dict
    cov_error: dict
    n_train: int
    n_test: int


def split(dataset: Sequence, spec: SplitSpec = SplitSpec()):
    """Seeded shuffle into ``floor(f n)`` training and ``n - floor(f n)`` test items."""
    n = len(dataset)
    if n < 2:
        raise SplitError("need at least 2 samples to split")
    k = int(np.floor(spec.train_fraction * n))
    if k == 0 or k == n:
        raise SplitError(f"split of {n} samples at fraction {spec.train_fraction} leaves one side empty")
    perm = np.random.default_rng(spec.seed).permutation(n)
    train = [dataset[i] for i in perm[:k]]
    test = [dataset[i] for i in perm[k:]]
    return train, test


def cov_error(predictions, actuals) -> float:
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape or p.size == 0:
        raise ValueError("predictions and actuals must be non-empty and equally long")
    mu = a.mean()
    if mu == 0:
        raise UndefinedMetricError("mean of actual values is zero; coefficient of variation undefined")
    return float(np.std(p - a) / mu)


def error_report(models: SurrogateTriple, test: Sequence, n_train: int) -> ErrorReport:
    X = np.array([r.x for r in test])
    sigma, mu, cov = {}, {}, {}
    for t in OUTPUTS:
        pred = getattr(models, t).predict(X)
        act = np.array([r.value(t) for r in test])
        sigma[t] = float(np.std(pred - act))
        mu[t] = float(act.mean())
        cov[t] = cov_error(pred, act)
    return ErrorReport(sigma, mu, cov, n_train, len(test))


def validate(dataset: Sequence, space: DesignSpace, spec: SplitSpec = SplitSpec(),
             kernel: KernelSpec = KernelSpec()):
    """Split, fit on the training part, score on the rest.  Returns ``(models, report)``."""
    train, test = split(dataset, spec)
    models = fit_triple(train, space, kernel)
    return models, error_report(models, test, len(train))


def learning_curve(space: DesignSpace, oracle, sizes: Sequence[int], spec: SplitSpec = SplitSpec(),
                   kernel: KernelSpec = KernelSpec(), policy: RetryPolicy = RetryPolicy(),
                   skip: int = 1, seed: int = 0) -> list[dict]:
    """Hold-out error for growing dataset sizes.

    Every size draws the leading Sobol prefix of that length, so larger
    datasets contain the smaller ones.  A size whose row fails (e.g. too
    few samples to fit) reports NaN errors and the failure text.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    rows = []
    full = generate_dataset(space, oracle, max(sizes), policy, skip, seed) if sizes else []
    for n in sizes:
        row = {"size": n}
        try:
            _, rep = validate(full[:n], space, spec, kernel)
            row.update({t: rep.cov_error[t] for t in OUTPUTS}, n_train=rep.n_train, error="")
        except OopstiffError as exc:
            row.update({t: float("nan") for t in OUTPUTS}, n_train=0, error=str(exc))
        rows.append(row)
    return rows


def write_error_report_csv(report: ErrorReport, path) -> Path:
    rows = [[t, report.sigma[t], report.mu[t], report.cov_error[t], report.n_train, report.n_test]
            for t in OUTPUTS]
    return write_csv(path, ["target", "sigma", "mu", "cov_error", "n_train", "n_test"], rows)


def write_learning_curve_csv(rows: Sequence[dict], path) -> Path:
    out = [[r["size"], r["U"], r["F"], r["theta"], r["error"]] for r in rows]
    return write_csv(path, ["size", "U_error", "F_error", "theta_error", "error"], out)
