"""A small dense SQP solver for bound/linearly constrained problems with
nonlinear equalities.

Each iteration solves the elastic (l1-relaxed) quadratic subproblem

    min_d  g.d + 1/2 d'Bd + rho*|s+ + s-|_1
    s.t.   c + J d = s+ - s-,   G (x + d) <= h,   lb <= x + d <= ub,   s+- >= 0

with a primal active-set QP method, then backtracks on the exact penalty
merit ``f + rho*|c|_1``.  ``B`` is a damped BFGS approximation of the
Lagrangian Hessian.  Linear constraints and bounds are honoured at every
iterate; only the nonlinear equalities may be violated along the way.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class SqpSettings:
    max_iter: int = 200
    max_line_search: int = 40
    stationarity_tol: float = 1e-6
    eq_tol: float = 1e-8
    penalty: float = 10.0
    max_penalty: float = 1e10
    armijo: float = 1e-4
    active_tol: float = 1e-10


@dataclass
class SqpResult:
    x: np.ndarray
    fun: float
    eq_residual: np.ndarray
    stationarity: float
    multipliers: np.ndarray
    active: list
    nit: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)


def solve_qp(H, q, E, e, G, h, z0, active0=(), max_iter=None):
    """Primal active-set method for a strictly convex QP.

    min 1/2 z'Hz + q'z  s.t.  E z = e,  G z <= h, started from the
    feasible ``z0``.  Returns ``(z, lam_eq, nu)`` where ``nu`` holds one
    non-negative multiplier per row of ``G``.
    """
    n = len(q)
    meq = E.shape[0]
    z = np.array(z0, dtype=float)
    W = []
    for i in active0:
        trial = np.vstack([E, G[W + [i]]])
        if np.linalg.matrix_rank(trial) == trial.shape[0]:
            W.append(i)
    if max_iter is None:
        max_iter = 50 * (n + G.shape[0] + meq) + 50
    scale = max(1.0, np.abs(q).max(initial=0.0), np.abs(H).max(initial=0.0))
    for _ in range(max_iter):
        A = np.vstack([E, G[W]]) if W else E
        na = A.shape[0]
        g = H @ z + q
        K = np.zeros((n + na, n + na))
        K[:n, :n] = H
        K[:n, n:] = A.T
        K[n:, :n] = A
        rhs = np.concatenate([-g, np.zeros(na)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        p, lam = sol[:n], sol[n:]
        if na >= n:
            p = np.zeros(n)  # vertex of the working set
        if np.abs(p).max(initial=0.0) <= 1e-11 * max(1.0, np.abs(z).max(initial=0.0)):
            mu = lam[meq:]
            if len(mu) == 0 or mu.min() >= -1e-12 * scale:
                nu = np.zeros(G.shape[0])
                nu[W] = np.maximum(mu, 0.0)
                return z, lam[:meq], nu
            W.pop(int(np.argmin(mu)))
            continue
        alpha, block = 1.0, None
        Gp = G @ p
        slack = h - G @ z
        for i in range(G.shape[0]):
            if i in W or Gp[i] <= 1e-14 * np.abs(G[i]).sum():
                continue
            t = max(slack[i], 0.0) / Gp[i]
            if t < alpha:
                alpha, block = t, i
        z = z + alpha * p
        if block is not None:
            W.append(block)
    raise RuntimeError("QP active-set iteration limit reached")


def sqp_minimize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    lb=None,
    ub=None,
    eq_fun: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    eq_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    A_ub=None,
    b_ub=None,
    settings: SqpSettings = SqpSettings(),
    eq_names: Sequence[str] = (),
) -> SqpResult:
    """Minimize ``fun`` subject to bounds, ``A_ub x <= b_ub`` and ``eq_fun(x) = 0``.

    ``x0`` must satisfy the bounds and linear inequalities.  Termination
    requires the Lagrangian gradient (with multipliers of active
    constraints) to be at most ``stationarity_tol * (1 + |f|)`` in the
    infinity norm and every equality residual at most ``eq_tol``.
    """
    x = np.array(x0, dtype=float)
    n = len(x)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    if eq_fun is None:
        eq_fun = lambda z: np.zeros(0)  # noqa: E731
        eq_jac = lambda z: np.zeros((0, n))  # noqa: E731
    if np.any(x < lb) or np.any(x > ub) or np.any(A_ub @ x > b_ub + 1e-12):
        raise DomainError("initial point violates bounds or linear constraints")

    # inequality rows on d: linear, upper bounds, lower bounds (finite only)
    fin_u = np.nonzero(np.isfinite(ub))[0]
    fin_l = np.nonzero(np.isfinite(lb))[0]
    Gx = np.vstack([A_ub, np.eye(n)[fin_u], -np.eye(n)[fin_l]])
    labels = ([f"linear[{i}]" for i in range(len(b_ub))] + [f"upper[{i}]" for i in fin_u]
              + [f"lower[{i}]" for i in fin_l])

    def hx(z):
        return np.concatenate([b_ub - A_ub @ z, ub[fin_u] - z[fin_u], z[fin_l] - lb[fin_l]])

    def eq_label(i):
        return eq_names[i] if i < len(eq_names) else f"equality[{i}]"

    B = np.eye(n)
    rho = settings.penalty
    f, g = float(fun(x)), np.asarray(grad(x), dtype=float)
    c, J = np.atleast_1d(eq_fun(x)).astype(float), np.atleast_2d(eq_jac(x)).reshape(-1, n)
    m = len(c)
    trace = []
    lam = np.zeros(m)
    stat = np.inf
    delta = 1e-4
    message = "iteration limit reached"
    converged = False
    nit = 0
    active_rows = []

    def merit(fv, cv, r):
        return fv + r * np.abs(cv).sum()

    for nit in range(settings.max_iter + 1):
        slack_x = hx(x)
        # elastic QP in z = (d, s+, s-)
        nz = n + 2 * m
        H = np.zeros((nz, nz))
        H[:n, :n] = B
        H[n:, n:] = delta * rho * np.eye(2 * m)
        E = np.hstack([J, -np.eye(m), np.eye(m)]) if m else np.zeros((0, nz))
        e = -c
        G = np.vstack([
            np.hstack([Gx, np.zeros((Gx.shape[0], 2 * m))]),
            np.hstack([np.zeros((2 * m, n)), -np.eye(2 * m)]),
        ])
        hvec = np.concatenate([np.maximum(slack_x, 0.0), np.zeros(2 * m)])
        z0 = np.concatenate([np.zeros(n), np.maximum(c, 0.0), np.maximum(-c, 0.0)])
        active0 = [i for i in range(G.shape[0]) if hvec[i] - G[i] @ z0 <= 0.0]
        while True:
            q = np.concatenate([g, np.full(2 * m, rho)])
            H[n:, n:] = delta * rho * np.eye(2 * m)
            z, lam_qp, nu = solve_qp(H, q, E, e, G, hvec, z0, active0)
            svals = z[n:]
            if m == 0 or svals.max() <= 1e-10 * (1.0 + np.abs(c).max()) or rho >= settings.max_penalty:
                break
            rho = min(rho * 10.0, settings.max_penalty)
        d = z[:n]
        lam = lam_qp
        nu_x = nu[: Gx.shape[0]]
        act = slack_x <= settings.active_tol * (1.0 + np.abs(np.concatenate(
            [b_ub, ub[fin_u], lb[fin_l]])))
        resid = g + (J.T @ lam if m else 0.0) + Gx[act].T @ nu_x[act]
        stat = float(np.abs(resid).max(initial=0.0))
        viol = float(np.abs(c).max(initial=0.0))
        active_rows = [labels[i] for i in np.nonzero(act)[0]]
        if stat <= settings.stationarity_tol * (1.0 + abs(f)) and viol <= settings.eq_tol:
            converged = True
            message = "converged"
            break
        if nit == settings.max_iter:
            break
        if np.abs(d).max() <= 1e-14 * (1.0 + np.abs(x).max()):
            if viol > settings.eq_tol:
                worst = int(np.argmax(np.abs(c)))
                message = (f"stalled: {eq_label(worst)} cannot be satisfied within the feasible region "
                           f"(residual {c[worst]:.3g})")
            else:
                message = f"stalled with stationarity {stat:.3g} above tolerance"
            break

        phi0 = merit(f, c, rho)
        D = float(g @ d + rho * (np.abs(c + J @ d).sum() - np.abs(c).sum())) if m else float(g @ d)
        if D >= 0:
            D = -float(d @ B @ d)
        alpha = 1.0
        accepted = False
        for ls in range(settings.max_line_search):
            xt = x + alpha * d
            xt = np.clip(xt, lb, ub)
            ft = float(fun(xt))
            ct = np.atleast_1d(eq_fun(xt)).astype(float)
            phit = merit(ft, ct, rho)
            if phit <= phi0 + settings.armijo * alpha * D:
                accepted = True
                break
            if ls == 0 and m:
                # second-order correction against the Maratos effect
                corr = -np.linalg.lstsq(J, ct, rcond=None)[0]
                xs = x + d + corr
                if np.all(xs >= lb) and np.all(xs <= ub) and np.all(A_ub @ xs <= b_ub):
                    fs = float(fun(xs))
                    cs = np.atleast_1d(eq_fun(xs)).astype(float)
                    phis = merit(fs, cs, rho)
                    if phis <= phi0 + settings.armijo * D:
                        xt, ft, ct, phit = xs, fs, cs, phis
                        accepted = True
                        break
            alpha *= 0.5
        if not accepted:
            message = f"line search failed after {settings.max_line_search} trials"
            break
        gt = np.asarray(grad(xt), dtype=float)
        Jt = np.atleast_2d(eq_jac(xt)).reshape(-1, n)
        s = xt - x
        y = (gt - g) + ((Jt - J).T @ lam if m else 0.0)
        sBs = float(s @ B @ s)
        if sBs > 1e-300:
            sy = float(s @ y)
            if sy < 0.2 * sBs:
                th = 0.8 * sBs / (sBs - sy)
                y = th * y + (1.0 - th) * (B @ s)
                sy = float(s @ y)
            Bs = B @ s
            B = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
        trace.append({
            "iteration": nit + 1,
            "alpha": alpha,
            "penalty": rho,
            "merit_before": phi0,
            "merit_after": phit,
            "objective": ft,
            "violation": float(np.abs(ct).max(initial=0.0)),
            "stationarity": stat,
        })
        x, f, g, c, J = xt, ft, gt, ct, Jt

    if not converged and message == "iteration limit reached" and m and np.abs(c).max() > settings.eq_tol:
        worst = int(np.argmax(np.abs(c)))
        message += f"; {eq_label(worst)} residual {c[worst]:.3g}"
    return SqpResult(x, f, c, stat, lam, active_rows, len(trace), converged, message, trace)
