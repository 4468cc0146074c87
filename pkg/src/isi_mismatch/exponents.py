"""Random-coding error exponents for the spherical ensemble.

For a memoryless metric ``-(y_t - alpha0 x_t)^2`` (or the correlation decoder)
the exponent is

    E(R) = min_{P_Y, rho} { D(P_Y, rho) + [I(rho) - R]_+ },

where ``D(P_Y, rho) = max_w V(w, P_Y, rho)`` is the divergence between the
Gaussian law tilted to have output power ``P_Y`` and input-output correlation
``rho`` and the true ISI channel, and ``I`` is the mismatch information
(``-log(1 - rho^2)/2`` when the metric has the right sign, 0 otherwise).

``V`` is concave in ``w = (w0, w1, w2)``: up to a constant its log term is the
normalised log-determinant of a 2x2 Hermitian symbol that is affine in ``w``.
The inner maximisation uses Newton's method with exact derivatives; the
outer minimisation scans a grid once per channel and refines per rate.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .model import ChannelModel, InfeasibleError, InvalidInputError
from .optimize import BOUNDARY, CONVERGED, INFEASIBLE, MAX_ITERATIONS, minimize_vector_convex
from .spectra import freq_response, frequency_grid

RHO_EDGE = 1e-6
SYMBOL_MARGIN = 1e-9
EXPONENT_POINTS = 1024


@dataclass(frozen=True)
class ExponentConfig:
    n_points: int = EXPONENT_POINTS
    grid_py: int = 41
    grid_rho: int = 41
    py_max: float | None = None  # default 4 (|h|^2 P_X + sigma2)
    refine: bool = True
    max_widen: int = 4

    def __post_init__(self):
        if self.grid_py < 3 or self.grid_rho < 3:
            raise InvalidInputError("exponent grids need at least 3 points per axis")


DEFAULT_EXPONENT_CONFIG = ExponentConfig()


@dataclass
class ExponentResult:
    exponent: float
    rate: float
    argmin: tuple[float, float]
    arg_omega_hat: np.ndarray
    status: str = CONVERGED
    divergence: float = float("nan")
    info: float = float("nan")
    extra: dict = field(default_factory=dict)


def mismatch_info(rho: float, h0: float, alpha0: float) -> float:
    """``-(|sgn h0 + sgn alpha0| / 4) log(1 - rho^2)``; ``inf`` at ``|rho| = 1``."""
    if abs(rho) > 1:
        raise InvalidInputError(f"correlation must lie in [-1, 1], got {rho}")
    weight = abs(np.sign(h0) + np.sign(alpha0)) / 4.0
    if weight == 0:
        return 0.0
    if abs(rho) == 1:
        return math.inf
    return -weight * math.log1p(-rho * rho)


def universal_info(rho: float) -> float:
    if abs(rho) > 1:
        raise InvalidInputError(f"correlation must lie in [-1, 1], got {rho}")
    if abs(rho) == 1:
        return math.inf
    return -0.5 * math.log1p(-rho * rho)


class TiltedDivergence:
    """``V(w, P_Y, rho)`` and its maximisation over ``w`` for a fixed channel.

    Per frequency the tilted quadratic form has the Hermitian matrix
    ``M = [[2 w0 + |H|^2/s2, w1 - conj(H)/s2], [w1 - H/s2, 2 lam]]`` with
    ``lam = 1/(2 s2) + w2``; ``det M = 4 s(nu)`` where ``s`` is
    :func:`~isi_mismatch.spectra.exponent_symbol`.
    """

    def __init__(self, channel: ChannelModel, n_points: int = EXPONENT_POINTS):
        self.channel = channel
        nu = frequency_grid(n_points)
        resp = freq_response(channel.h, nu)
        s2 = channel.sigma2
        self.a = np.abs(resp) ** 2 / s2
        self.b_re = resp.real / s2
        self.b_abs2 = np.abs(resp) ** 2 / s2 ** 2
        self.n_points = n_points
        self.const = 0.5 * math.log(channel.p_x * channel.sigma2) + 0.5  # log(4 e P s2 s)/2 = log(det M)/2 + const

    def det(self, w) -> np.ndarray:
        w0, w1, w2 = w
        lam = 0.5 / self.channel.sigma2 + w2
        # |w1 - H/s2|^2 = w1^2 - 2 w1 Re(H)/s2 + |H|^2/s2^2
        return (2.0 * w0 + self.a) * 2.0 * lam - (w1 * w1 - 2.0 * w1 * self.b_re + self.b_abs2)

    def feasible(self, w) -> bool:
        lam = 0.5 / self.channel.sigma2 + w[2]
        return lam > 0 and float(np.min(self.det(w))) > 4.0 * SYMBOL_MARGIN

    def value(self, w, p_y: float, rho: float) -> float:
        """``V``; raises :class:`InfeasibleError` outside the admissible set."""
        w = np.asarray(w, dtype=float)
        if not self.feasible(w):
            raise InfeasibleError(f"omega_hat = {w.tolist()} makes the tilted integral diverge")
        return self._v(w, p_y, rho)

    def _linear(self, p_y, rho):
        p_x = self.channel.p_x
        return np.array([p_x, rho * math.sqrt(p_x * p_y), p_y])

    def _v(self, w, p_y, rho):
        d = self.det(w)
        return 0.5 * float(np.mean(np.log(d))) + self.const - float(np.dot(w, self._linear(p_y, rho)))

    def _neg_v(self, p_y, rho):
        lin = self._linear(p_y, rho)
        s2 = self.channel.sigma2

        def f(w):
            if 0.5 / s2 + w[2] <= 0:
                return math.inf
            d = self.det(w)
            if not float(np.min(d)) > 4.0 * SYMBOL_MARGIN:
                return math.inf
            return -(0.5 * float(np.mean(np.log(d))) + self.const) + float(np.dot(w, lin))

        def grad(w):
            w0, w1, w2 = w
            lam2 = 1.0 / s2 + 2.0 * w2
            inv = 1.0 / self.det(w)
            dd = np.vstack([2.0 * lam2 * np.ones_like(inv), -2.0 * (w1 - self.b_re), 2.0 * (2.0 * w0 + self.a)])
            return -0.5 * (dd @ inv) / inv.size + lin

        def hess(w):
            w0, w1, w2 = w
            lam2 = 1.0 / s2 + 2.0 * w2
            inv = 1.0 / self.det(w)
            dd = np.vstack([2.0 * lam2 * np.ones_like(inv), -2.0 * (w1 - self.b_re), 2.0 * (2.0 * w0 + self.a)])
            outer = (dd * inv ** 2) @ dd.T / inv.size
            second = np.zeros((3, 3))
            m = float(np.mean(inv))
            second[0, 2] = second[2, 0] = 4.0 * m
            second[1, 1] = -2.0 * m
            return -0.5 * (second - outer)

        return f, grad, hess

    def start(self) -> np.ndarray:
        # w1 = w2 = 0 gives det M = 4 w0 / (2 s2) > 0 for any w0 > 0
        return np.array([1.0 / self.channel.p_x, 0.0, 0.0])

    def maximize(self, p_y: float, rho: float, warm=None):
        """``(max_w V, argmax, status)``."""
        if not p_y > 0:
            raise InvalidInputError(f"output power must be positive, got {p_y}")
        if not abs(rho) < 1:
            raise InvalidInputError(f"correlation must satisfy |rho| < 1, got {rho}")
        f, grad, hess = self._neg_v(p_y, rho)
        x0 = self.start()
        if warm is not None and math.isfinite(f(warm)):
            x0 = np.asarray(warm, dtype=float)
        res = minimize_vector_convex(f, x0, grad=grad, hess=hess, tol=1e-13, grad_tol=1e-10)
        if res.status not in (CONVERGED, BOUNDARY) and warm is not None:
            res = minimize_vector_convex(f, self.start(), grad=grad, hess=hess, tol=1e-13, grad_tol=1e-10)
        if res.status == INFEASIBLE or not math.isfinite(res.value):
            return math.inf, res.x, INFEASIBLE
        return -res.value, res.x, res.status


def objective_v(omega_hat, p_y: float, rho: float, channel: ChannelModel, n_points: int = EXPONENT_POINTS) -> float:
    """``V(w, P_Y, rho) = mean(log(4 e P_X sigma2 s))/2 - w0 P_X - w1 rho sqrt(P_X P_Y) - w2 P_Y``."""
    return TiltedDivergence(channel, n_points).value(omega_hat, p_y, rho)


def true_statistics(channel: ChannelModel) -> tuple[float, float]:
    """Output power and input-output correlation of the channel under a white input."""
    p_y = channel.output_power()
    return p_y, channel.h[0] * channel.p_x / math.sqrt(channel.p_x * p_y)


class ExponentSolver:
    """Evaluates ``E(R)`` for one channel and information term, reusing the
    divergence grid across rates."""

    def __init__(self, channel: ChannelModel, info, config: ExponentConfig = DEFAULT_EXPONENT_CONFIG):
        self.channel = channel
        self.info = info
        self.config = config
        self.div = TiltedDivergence(channel, config.n_points)
        self._cache: dict[tuple[float, float], tuple[float, np.ndarray]] = {}
        self.py_max = config.py_max or 4.0 * channel.output_power()
        self._build_grid()

    def divergence(self, p_y: float, rho: float, warm=None):
        key = (float(p_y), float(rho))
        hit = self._cache.get(key)
        if hit is None:
            value, w, status = self.div.maximize(p_y, rho, warm)
            if status not in (CONVERGED, BOUNDARY):
                # an unconverged maximiser only bounds D from below; drop the point
                value = math.inf
            hit = (value, w)
            self._cache[key] = hit
        return hit

    def _build_grid(self):
        cfg = self.config
        py = np.linspace(self.py_max / cfg.grid_py, self.py_max, cfg.grid_py)
        rho = np.linspace(-1.0 + RHO_EDGE, 1.0 - RHO_EDGE, cfg.grid_rho)
        pts = [(a, r) for a in py for r in rho]
        pts.append(true_statistics(self.channel))
        values = np.empty(len(pts))
        warm = None
        for i, (a, r) in enumerate(pts):
            v, w = self.divergence(a, r, warm)
            values[i] = v
            warm = w if math.isfinite(v) else None
        self.points = np.array(pts)
        self.grid_values = values
        self.grid_info = np.array([self.info(r) for _, r in pts])

    def _score(self, x, rate):
        p_y, rho = x
        if not (0 < p_y <= self.py_max and abs(rho) <= 1 - RHO_EDGE):
            return math.inf
        d, _ = self.divergence(p_y, rho)
        return d + max(0.0, self.info(rho) - rate)

    def __call__(self, rate: float) -> ExponentResult:
        if not rate >= 0:
            raise InvalidInputError(f"rate must be nonnegative, got {rate}")
        for _ in range(self.config.max_widen + 1):
            total = self.grid_values + np.maximum(0.0, self.grid_info - rate)
            order = np.argsort(total)
            best_x = self.points[order[0]]
            best = float(total[order[0]])
            status = CONVERGED
            if self.config.refine:
                # restart from the three best grid points; the [.]_+ kink can trap a single simplex
                step = np.array([self.py_max / self.config.grid_py, 2.0 / self.config.grid_rho])
                for idx in order[:3]:
                    x0 = self.points[idx]
                    simplex = np.array([x0, x0 + [step[0], 0.0], x0 + [0.0, step[1]]])
                    simplex[:, 0] = np.clip(simplex[:, 0], 1e-9, self.py_max)
                    simplex[:, 1] = np.clip(simplex[:, 1], -1 + RHO_EDGE, 1 - RHO_EDGE)
                    res = minimize(self._score, x0, args=(rate,), method="Nelder-Mead",
                                   options={"initial_simplex": simplex, "xatol": 1e-8, "fatol": 1e-12,
                                            "maxfev": 2000})
                    if res.fun < best:
                        best, best_x = float(res.fun), np.asarray(res.x)
                    if not res.success:
                        status = MAX_ITERATIONS
            if best_x[0] < self.py_max * (1 - 1.0 / self.config.grid_py) or self.config.py_max is not None:
                break
            # minimiser on the outer edge of the P_Y box: widen and rescan
            self.py_max *= 2.0
            self._build_grid()
            status = BOUNDARY
        if not math.isfinite(best):
            raise InfeasibleError("no feasible (P_Y, rho) point in the search box")
        d, w = self.divergence(*best_x)
        return ExponentResult(max(0.0, best), float(rate), (float(best_x[0]), float(best_x[1])), w, status,
                              float(d), float(self.info(best_x[1])), {"py_max": self.py_max})

    def curve(self, rates) -> list[ExponentResult]:
        return [self(float(r)) for r in rates]


def _check_memoryless(channel, alpha0, p_x):
    if p_x is not None and abs(p_x - channel.p_x) > 1e-12 * channel.p_x:
        raise InvalidInputError(f"p_x = {p_x} disagrees with the channel's input power {channel.p_x}")
    if not math.isfinite(alpha0):
        raise InvalidInputError("alpha0 must be finite")


def exponent_solver(channel: ChannelModel, alpha0: float | None = None,
                    config: ExponentConfig = DEFAULT_EXPONENT_CONFIG) -> ExponentSolver:
    """Solver for the metric ``alpha0`` or, with ``alpha0=None``, the correlation decoder."""
    if alpha0 is None:
        return ExponentSolver(channel, universal_info, config)
    h0 = float(channel.h[0])
    return ExponentSolver(channel, lambda rho: mismatch_info(rho, h0, alpha0), config)


def error_exponent(channel: ChannelModel, alpha0: float, p_x: float | None, rate: float,
                   config: ExponentConfig = DEFAULT_EXPONENT_CONFIG) -> ExponentResult:
    """Exponent of the spherical ensemble decoded with the memoryless metric ``alpha0``."""
    _check_memoryless(channel, alpha0, p_x)
    return exponent_solver(channel, alpha0, config)(rate)


def error_exponent_universal(channel: ChannelModel, p_x: float | None, rate: float,
                             config: ExponentConfig = DEFAULT_EXPONENT_CONFIG) -> ExponentResult:
    """Exponent of the spherical ensemble with the correlation (GLRT) decoder."""
    _check_memoryless(channel, 1.0, p_x)
    return exponent_solver(channel, None, config)(rate)


EXPONENT_HEADER = ("rate", "exponent", "p_y", "rho", "status")


def curve_to_csv(results, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EXPONENT_HEADER)
    for r in results:
        writer.writerow([f"{r.rate:.10g}", f"{r.exponent:.10g}", f"{r.argmin[0]:.10g}", f"{r.argmin[1]:.10g}",
                         r.status])
