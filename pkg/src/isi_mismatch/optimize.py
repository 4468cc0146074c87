"""Small optimisers for the inner (convex) and outer (heuristic) problems.

* :func:`minimize_scalar_convex` - golden-section search on ``[lower, inf)``
  after exponential bracket expansion.
* :func:`minimize_vector_convex` - damped Newton with finite-difference
  derivatives; simple lower bounds are handled by an active set, general
  linear inequalities by a log barrier.  The objective may return ``inf``
  outside its (open, convex) domain.
* :func:`maximize_outer` - coarse grid scan followed by Nelder-Mead from the
  best grid point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

CONVERGED = "converged"
BOUNDARY = "boundary"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OptResult:
    x: np.ndarray
    value: float
    status: str
    iterations: int = 0
    tolerance_achieved: float = float("nan")
    evaluations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, BOUNDARY)


class _Counted:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        try:
            v = float(self.f(x))
        except (ArithmeticError, ValueError, RuntimeError):
            return math.inf
        return v if not math.isnan(v) else math.inf


# ---------------------------------------------------------------------------
# scalar


def minimize_scalar_convex(f: Callable[[float], float], lower: float = 0.0,
                           initial_bracket: tuple[float, float] | None = None,
                           tol: float = 1e-8, max_iter: int = 500) -> OptResult:
    """Minimise a convex ``f`` on ``[lower, inf)``.

    ``initial_bracket`` is a ``(lower, upper)`` guess; the upper end is pushed
    outwards geometrically while ``f`` keeps decreasing, then golden-section
    search shrinks the bracket below ``tol``.  A minimum at ``lower`` is
    reported with status ``boundary``.
    """
    fc = _Counted(f)
    lower = float(lower)
    width = 1.0
    if initial_bracket is not None and initial_bracket[1] > lower:
        width = float(initial_bracket[1]) - lower
    lo, f_lo = lower, fc(lower)
    mid, f_mid = lower + width, fc(lower + width)
    if not (math.isfinite(f_lo) or math.isfinite(f_mid)):
        return OptResult(np.array([lower]), math.inf, INFEASIBLE, 0, math.inf, fc.calls)

    iters = 0
    if f_mid >= f_lo:
        hi = mid
    else:
        while True:
            iters += 1
            hi = mid + 2.0 * (mid - lo)
            f_hi = fc(hi)
            if not f_hi < f_mid:
                break
            if iters >= 200:
                return OptResult(np.array([hi]), f_hi, MAX_ITERATIONS, iters, math.inf, fc.calls)
            lo, mid, f_mid = mid, hi, f_hi

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = fc(x1), fc(x2)
    while hi - lo > tol and iters < max_iter:
        iters += 1
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = fc(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = fc(x2)
    x_best, f_best = (x1, f1) if f1 <= f2 else (x2, f2)
    status = CONVERGED if hi - lo <= tol else MAX_ITERATIONS
    if x_best - lower <= 2.0 * tol:
        f_edge = fc(lower)
        if f_edge <= f_best:
            x_best, f_best, status = lower, f_edge, BOUNDARY
    if not math.isfinite(f_best):
        status = INFEASIBLE
    return OptResult(np.array([x_best]), f_best, status, iters, hi - lo, fc.calls)


# ---------------------------------------------------------------------------
# vector


def fd_gradient(f: Callable, x: np.ndarray, f0: float | None = None, rel_step: float = 1e-6,
                lower: np.ndarray | None = None) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_i|)``; falls back to a
    one-sided difference next to a bound or the edge of the domain."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        for _ in range(30):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fp = f(xp)
            below = lower is not None and xm[i] < lower[i]
            fm = math.inf if below else f(xm)
            if math.isfinite(fp) and math.isfinite(fm):
                g[i] = (fp - fm) / (2.0 * h)
                break
            base = f(x) if f0 is None else f0
            if math.isfinite(fp):
                g[i] = (fp - base) / h
                break
            if math.isfinite(fm):
                g[i] = (base - fm) / h
                break
            h *= 0.25
        else:
            g[i] = math.nan
    return g


def fd_hessian(f: Callable, x: np.ndarray, f0: float, rel_step: float = 1e-4) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.size
    hs = np.array([rel_step * max(1.0, abs(v)) for v in x])
    H = np.empty((d, d))
    for _ in range(30):
        ok = True
        for i in range(d):
            e = np.zeros(d)
            e[i] = hs[i]
            fp, fm = f(x + e), f(x - e)
            if not (math.isfinite(fp) and math.isfinite(fm)):
                ok = False
                break
            H[i, i] = (fp - 2.0 * f0 + fm) / hs[i] ** 2
            for j in range(i):
                e2 = np.zeros(d)
                e2[j] = hs[j]
                vals = [f(x + e + e2), f(x + e - e2), f(x - e + e2), f(x - e - e2)]
                if not all(math.isfinite(v) for v in vals):
                    ok = False
                    break
                H[i, j] = H[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * hs[i] * hs[j])
            if not ok:
                break
        if ok:
            return H
        hs *= 0.25
    return np.eye(d)


def _newton_direction(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    H = 0.5 * (H + H.T)
    try:
        # exact Newton step whenever H is numerically positive definite; clipping
        # eigenvalues distorts the step on badly conditioned but valid Hessians
        L = np.linalg.cholesky(H)
        return -np.linalg.solve(L.T, np.linalg.solve(L, g))
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    w = np.maximum(w, 1e-10 * scale)
    return -(V @ ((V.T @ g) / w))


def _newton(f, x, *, grad, hess, lower, tol, grad_tol, max_iter):
    """Projected damped Newton on ``{x >= lower}`` (``lower`` may hold -inf)."""
    fx = f(x)
    status = MAX_ITERATIONS
    change = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        if not np.all(np.isfinite(g)):
            break
        free = ~((x <= lower) & (g > 0))
        if not np.any(free) or np.max(np.abs(g[free])) < grad_tol:
            status = CONVERGED
            break
        d = np.zeros_like(x)
        d[free] = _newton_direction(hess(x)[np.ix_(free, free)], g[free])
        if float(np.dot(g, d)) >= 0:
            d = -g * free
        elif -0.5 * float(np.dot(g, d)) < max(tol, 1e-12 * (1.0 + abs(fx))):
            # Newton decrement below tolerance or at the working precision of f
            status = CONVERGED
            break
        t = 1.0
        for _ in range(60):
            xn = np.maximum(x + t * d, lower)
            fn = f(xn)
            if math.isfinite(fn) and fn <= fx + 1e-4 * float(np.dot(g, xn - x)):
                break
            t *= 0.5
        else:
            # no descent left at working precision
            status = CONVERGED if change < tol or np.max(np.abs(g[free])) < 1e3 * grad_tol else MAX_ITERATIONS
            break
        change = fx - fn
        x, fx = xn, fn
        if change <= 0.0 and -float(np.dot(g, d)) < 1e-8 * (1.0 + abs(fx)):
            # accepted step that no longer moves f: stalled at working precision
            status = CONVERGED
            break
        if change < tol and t == 1.0:
            status = CONVERGED
            break
    return x, fx, status, it, change


def minimize_vector_convex(f: Callable[[np.ndarray], float], x0: Sequence[float], *,
                           lower: Sequence[float] | None = None,
                           linear_constraints: tuple[np.ndarray, np.ndarray] | None = None,
                           feasible: Callable[[np.ndarray], bool] | None = None,
                           grad: Callable | None = None, hess: Callable | None = None,
                           tol: float = 1e-10, grad_tol: float = 1e-9,
                           max_iter: int = 200) -> OptResult:
    """Minimise a convex ``f`` over ``{x >= lower, A x >= b, feasible(x)}``.

    ``f`` may return ``inf`` outside its domain and ``x0`` must be strictly
    feasible.  Derivatives default to finite differences (central, relative
    step 1e-6 for the gradient); analytic ``grad(x)`` / ``hess(x)`` may be
    supplied.  Linear inequalities ``A x >= b`` are enforced with a log
    barrier whose weight is driven below ``tol``.
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    lo = np.full(d, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    fc = _Counted(f)

    def base(z):
        if feasible is not None and not feasible(z):
            return math.inf
        return fc(z)

    x = np.maximum(x, lo)
    if not math.isfinite(base(x)):
        return OptResult(x, math.inf, INFEASIBLE, 0, math.inf, fc.calls,
                         extra={"reason": "starting point is not feasible"})

    def base_grad(z):
        return np.asarray(grad(z), dtype=float) if grad is not None else fd_gradient(base, z, lower=lo)

    def base_hess(z):
        if hess is not None:
            return np.asarray(hess(z), dtype=float)
        if grad is not None:
            return _jacobian_of(base_grad, z)
        return fd_hessian(base, z, base(z))

    if linear_constraints is None:
        x, fx, status, it, change = _newton(base, x, grad=base_grad, hess=base_hess, lower=lo,
                                            tol=tol, grad_tol=grad_tol, max_iter=max_iter)
    else:
        A = np.atleast_2d(np.asarray(linear_constraints[0], dtype=float))
        b = np.asarray(linear_constraints[1], dtype=float)
        if np.any(A @ x - b <= 0):
            return OptResult(x, math.inf, INFEASIBLE, 0, math.inf, fc.calls,
                             extra={"reason": "starting point is not strictly inside the linear constraints"})
        mu, it, status, change = 1e-2, 0, MAX_ITERATIONS, math.inf
        while True:
            def barrier(z, mu=mu):
                s = A @ z - b
                return math.inf if np.any(s <= 0) else base(z) - mu * float(np.sum(np.log(s)))

            def bar_grad(z, mu=mu):
                return base_grad(z) - mu * (A.T @ (1.0 / (A @ z - b)))

            def bar_hess(z, mu=mu):
                s = A @ z - b
                return base_hess(z) + mu * (A.T * (1.0 / s ** 2)) @ A

            x, _, status, k, change = _newton(barrier, x, grad=bar_grad, hess=bar_hess, lower=lo, tol=tol,
                                              grad_tol=max(grad_tol, 1e-3 * mu), max_iter=max_iter)
            it += k
            if mu * A.shape[0] < tol:
                break
            mu *= 0.1
        fx = base(x)
        # the barrier keeps iterates strictly inside; flag near-active rows
        active = (A @ x - b) <= 1e-5 * (1.0 + np.abs(A) @ np.abs(x))
        if status == CONVERGED and np.any(active):
            status = BOUNDARY
    if not math.isfinite(fx):
        status = INFEASIBLE
    elif status == CONVERGED and np.any(x <= lo):
        status = BOUNDARY
    return OptResult(x, fx, status, it, change, fc.calls)


def _jacobian_of(fun, x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fun(x + e) - fun(x - e)) / (2.0 * h))
    J = np.column_stack(cols)
    return 0.5 * (J + J.T)


# ---------------------------------------------------------------------------
# outer


def maximize_outer(f: Callable[[np.ndarray], float], bounds: Sequence[tuple[float, float]],
                   feasible: Callable[[np.ndarray], bool] | None = None, resolution: int = 41,
                   refine: bool = True, xatol: float = 1e-7, fatol: float = 1e-11,
                   max_evals: int = 2000) -> OptResult:
    """Maximise ``f`` over a box: grid scan, then Nelder-Mead refinement.

    Infeasible points (``feasible`` false, outside the box, or ``f`` not
    finite) score ``-inf``.  Ties on the grid go to the first point in
    lexicographic order.
    """
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    d = len(bounds)
    fc = _Counted(lambda x: -f(x))

    def score(x):
        x = np.asarray(x, dtype=float)
        if any(not (lo <= v <= hi) for v, (lo, hi) in zip(x, bounds)):
            return -math.inf
        if feasible is not None and not feasible(x):
            return -math.inf
        v = -fc(x)
        return v if math.isfinite(v) else -math.inf

    if d == 0:
        v = score(np.zeros(0))
        return OptResult(np.zeros(0), v, CONVERGED if math.isfinite(v) else INFEASIBLE, 0, 0.0, fc.calls)

    axes = [np.linspace(lo, hi, resolution) if resolution > 1 else np.array([(lo + hi) / 2]) for lo, hi in bounds]
    best_x, best_v = None, -math.inf
    for point in itertools.product(*axes):
        v = score(point)
        if v > best_v:
            best_x, best_v = np.array(point), v
    if best_x is None:
        return OptResult(np.full(d, np.nan), -math.inf, INFEASIBLE, 0, math.inf, fc.calls)
    grid_x, grid_v = best_x, best_v
    iters = 0
    status = CONVERGED
    if refine:
        steps = np.array([(hi - lo) / max(resolution - 1, 1) for lo, hi in bounds])
        simplex = [best_x]
        for i in range(d):
            p = best_x.copy()
            p[i] += steps[i] / 2 if best_x[i] + steps[i] / 2 <= bounds[i][1] else -steps[i] / 2
            simplex.append(p)
        res = _scipy_minimize(lambda x: -score(x) if math.isfinite(score(x)) else 1e300, best_x,
                              method="Nelder-Mead",
                              options={"initial_simplex": np.array(simplex), "xatol": xatol,
                                       "fatol": fatol, "maxfev": max_evals})
        iters = int(res.nit)
        if -res.fun > best_v:
            best_x, best_v = np.asarray(res.x, dtype=float), -float(res.fun)
        if not res.success:
            status = MAX_ITERATIONS
    on_edge = any(abs(v - lo) < 1e-12 or abs(v - hi) < 1e-12 for v, (lo, hi) in zip(best_x, bounds))
    if status == CONVERGED and on_edge:
        status = BOUNDARY
    return OptResult(best_x, best_v, status, iters, xatol, fc.calls,
                     extra={"grid_argmax": grid_x, "grid_value": grid_v})
