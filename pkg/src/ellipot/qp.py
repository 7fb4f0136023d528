"""Quadratic programming on the scaled simplex {x >= 0, m.x = 1}."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QPNonConvergence(RuntimeError):
    pass


@dataclass
class QPResult:
    x: np.ndarray
    c: float
    multipliers: np.ndarray
    kkt: float
    iterations: int
    free: np.ndarray


def _solve_free(H, g, m, F):
    HF = H[np.ix_(F, F)]
    mF = m[F]
    n = len(F)
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = HF
    K[:n, n] = -mF
    K[n, :n] = mF
    rhs = np.concatenate([-g[F], [1.0]])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n]


def kkt_residual(H, g, m, x, c):
    lam = H @ x + g - c * m
    scale = max(1.0, np.max(np.abs(g)), np.max(np.abs(H @ x)))
    sup = x > 0
    stat = np.max(np.abs(lam[sup])) if np.any(sup) else 0.0
    dual = max(0.0, -np.min(lam[~sup])) if np.any(~sup) else 0.0
    primal = max(0.0, -np.min(x), abs(m @ x - 1.0))
    return max(stat, dual) / scale + primal, lam


def simplex_qp(H, g, m, x0=None, max_iter=2000, tol=1e-12) -> QPResult:
    """Minimize 1/2 x'Hx + g'x subject to x >= 0 and m'x = 1.

    Primal active-set method.  H must be positive definite on
    {m'x = 0}.  ``x0`` (feasible) selects the starting active set; by
    default all variables start free.
    """
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    m = np.asarray(m, float)
    N = len(g)
    if x0 is None:
        free = np.ones(N, bool)
        xF, c = _solve_free(H, g, m, np.flatnonzero(free))
        x = np.zeros(N)
        x[free] = xF
        if np.all(xF >= 0):
            kkt, lam = kkt_residual(H, g, m, x, c)
            if np.all(lam[~free] >= -tol):
                return QPResult(x, c, lam, kkt, 0, free)
        # start from the feasible uniform point instead
        x = np.ones(N) / m.sum()
        free = np.ones(N, bool)
    else:
        x = np.asarray(x0, float).copy()
        x = np.maximum(x, 0.0)
        x /= m @ x
        free = x > 0
    it = 0
    for it in range(1, max_iter + 1):
        F = np.flatnonzero(free)
        xF, c = _solve_free(H, g, m, F)
        target = np.zeros(N)
        target[F] = xF
        if np.all(xF >= -tol * max(1.0, np.max(np.abs(xF)))):
            x = np.maximum(target, 0.0)
            x /= m @ x
            lam = H @ x + g - c * m
            lam_act = np.where(free, np.inf, lam)
            j = int(np.argmin(lam_act))
            if lam_act[j] >= -tol * max(1.0, np.max(np.abs(g)), abs(c)):
                kkt, lam = kkt_residual(H, g, m, x, c)
                return QPResult(x, c, lam, kkt, it, free)
            free[j] = True
            continue
        # step towards target until a free variable hits zero
        d = target - x
        neg = (d < 0) & free
        ratios = np.where(neg, x / np.where(neg, -d, 1.0), np.inf)
        k = int(np.argmin(ratios))
        alpha = min(1.0, ratios[k])
        x = x + alpha * d
        x[k] = 0.0
        free[k] = False
        x = np.maximum(x, 0.0)
        if not np.any(free):
            raise QPNonConvergence("active set emptied")
    raise QPNonConvergence(f"active set did not converge in {max_iter} iterations")
