"""BFGS minimization with a strong Wolfe line search.

The line search follows the bracketing/zoom scheme of Nocedal & Wright
(Algorithms 3.5 and 3.6).  Near the optimum of a smooth convex objective,
differences in ``f`` drop below floating-point resolution long before the
gradient does, so sufficient decrease may also be certified by the
derivative test of Hager & Zhang's approximate Wolfe conditions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

FunGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


class LineSearchError(RuntimeError):
    pass


@dataclass
class LineSearchResult:
    alpha: float
    f: float
    g: np.ndarray
    n_evals: int


def _cubic_min(a, fa, da, b, fb, db) -> float | None:
    # minimizer of the cubic interpolating f and f' at a and b
    d1 = da + db - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(disc)
    denom = db - da + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / denom


def wolfe_line_search(fun: FunGrad, x: np.ndarray, f0: float, g0: np.ndarray, p: np.ndarray,
                      alpha0: float = 1.0, c1: float = 1e-4, c2: float = 0.9,
                      max_evals: int = 40, eps: float = 1e-12,
                      alpha_max: float = 1e10) -> LineSearchResult:
    """Find a step satisfying the strong Wolfe conditions along descent direction ``p``."""
    dphi0 = float(g0 @ p)
    if not dphi0 < 0:
        raise LineSearchError("search direction is not a descent direction")
    slack = eps * abs(f0)
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        f, g = fun(x + alpha * p)
        return float(f), g, float(g @ p)

    def sufficient(alpha, f, dphi):
        if f <= f0 + c1 * alpha * dphi0:
            return True
        # approximate Wolfe: f unchanged within round-off, slope says it went down
        return f <= f0 + slack and dphi <= (2 * c1 - 1) * dphi0

    def curvature(dphi):
        return abs(dphi) <= -c2 * dphi0

    def zoom(lo, hi):
        a_lo, f_lo, g_lo, d_lo = lo
        a_hi, f_hi, g_hi, d_hi = hi
        while evals < max_evals:
            trial = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            left, right = min(a_lo, a_hi), max(a_lo, a_hi)
            width = right - left
            if trial is None or not (left + 0.1 * width <= trial <= right - 0.1 * width):
                trial = 0.5 * (a_lo + a_hi)
            f, g, d = phi(trial)
            if not sufficient(trial, f, d) or f > f_lo:
                a_hi, f_hi, d_hi = trial, f, d
            else:
                if curvature(d):
                    return LineSearchResult(trial, f, g, evals)
                if d * (a_hi - a_lo) >= 0:
                    a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
                a_lo, f_lo, g_lo, d_lo = trial, f, g, d
            if abs(a_hi - a_lo) <= 1e-16 * max(1.0, abs(a_lo)):
                break
        if a_lo > 0:
            # best point found improves on x even if curvature was not met
            return LineSearchResult(a_lo, f_lo, g_lo, evals)
        raise LineSearchError("zoom failed to find an acceptable step")

    prev = (0.0, f0, g0, dphi0)
    alpha = alpha0
    for i in range(max_evals):
        f, g, d = phi(alpha)
        if not np.isfinite(f):
            # overflow guard: shrink into the finite region
            alpha *= 0.1
            continue
        cur = (alpha, f, g, d)
        if not sufficient(alpha, f, d) or (i > 0 and f > prev[1]):
            return zoom(prev, cur)
        if curvature(d):
            return LineSearchResult(alpha, f, g, evals)
        if d >= 0:
            return zoom(cur, prev)
        prev = cur
        alpha = min(2.0 * alpha, alpha_max)
        if evals >= max_evals:
            break
    raise LineSearchError("line search exceeded its evaluation budget")


@dataclass
class BFGSResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    n_evals: int
    converged: bool
    message: str
    inv_hessian: np.ndarray
    history: list[float] = field(default_factory=list)


def bfgs(fun: FunGrad, x0, gtol: float = 1e-8, max_iters: int = 500,
         x_cap: float | None = None) -> BFGSResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    Stops when the gradient infinity-norm drops to ``gtol``, after
    ``max_iters`` iterations, or when some ``|x_k|`` reaches ``x_cap``.
    """
    x = np.array(x0, dtype=np.float64)
    n = len(x)
    f, g = fun(x)
    f = float(f)
    n_evals = 1
    history = [f]
    H = np.eye(n)
    scaled = False
    message = "maximum iterations reached"
    converged = False
    it = 0
    if n == 0:
        return BFGSResult(x, f, g, 0, n_evals, True, "no parameters", H, history)

    while it < max_iters:
        if np.max(np.abs(g)) <= gtol:
            converged, message = True, "gradient tolerance reached"
            break
        if x_cap is not None and np.max(np.abs(x)) >= x_cap:
            message = "parameter exceeded divergence cap"
            break
        p = -H @ g
        if not float(g @ p) < 0:
            H = np.eye(n)
            p = -g
        alpha0 = 1.0 if scaled else min(1.0, 1.0 / np.max(np.abs(g)))
        try:
            ls = wolfe_line_search(fun, x, f, g, p, alpha0=alpha0)
        except LineSearchError as exc:
            if scaled or not np.allclose(H, np.eye(n)):
                log.debug("line search failed (%s); resetting curvature", exc)
                H = np.eye(n)
                scaled = False
                it += 1
                continue
            message = f"line search failed: {exc}"
            break
        n_evals += ls.n_evals
        s = ls.alpha * p
        y = ls.g - g
        x = x + s
        f, g = ls.f, ls.g
        history.append(f)
        it += 1
        sy = float(s @ y)
        if sy > 1e-300:
            if not scaled:
                H = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
    else:
        if np.max(np.abs(g)) <= gtol:
            converged, message = True, "gradient tolerance reached"
    if converged and x_cap is not None and np.max(np.abs(x)) >= x_cap:
        converged, message = False, "parameter exceeded divergence cap"
    return BFGSResult(x, f, g, it, n_evals, converged, message, H, history)
