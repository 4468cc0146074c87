"""Achievable rates for Gaussian ISI channels under a mismatched metric.

Three ensembles are covered:

``ar``  codewords generated by a stable AR(p) recursion; the rate is
        ``log(2 eta^2)/2 - min_{w >= 0} J_ar(w)`` with a scalar multiplier.
``fc``  codewords uniform on a set with prescribed lag autocovariances
        ``gamma_0..gamma_p`` ("fixed composition"); the inner problem has
        ``p + 2`` multipliers.
``universal``  the correlation (GLRT) decoder on the spherical ensemble,
        which has a closed form.

All rates are in nats per channel use.  Negative values of the formulas are
reported as 0 with the raw value kept in ``RateResult.raw_rate``.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import armodel
from .model import ChannelModel, DecoderMetric, InfeasibleError, InvalidInputError, align, tap_correlation
from .optimize import (BOUNDARY, CONVERGED, INFEASIBLE, OptResult, maximize_outer, minimize_scalar_convex,
                       minimize_vector_convex)
from .spectra import DEFAULT_POINTS, ar_response, freq_response, frequency_grid

SYMBOL_DOMAIN = "symbol"
NONNEGATIVE_DOMAIN = "nonnegative"
REFLECTION_BOUND = 0.99


@dataclass(frozen=True)
class RateConfig:
    """Numerical knobs shared by the rate evaluators.

    ``omega_domain`` selects the feasible set of the fixed-composition inner
    problem: ``"symbol"`` lets the lag multipliers take either sign and only
    requires the integrand to stay positive (the metric multiplier stays
    nonnegative); ``"nonnegative"`` additionally forces every multiplier to be
    nonnegative and the lag-0 multiplier to dominate the others.
    """

    n_points: int = DEFAULT_POINTS
    grid_points: int = 41
    refine: bool = True
    omega_domain: str = SYMBOL_DOMAIN
    reflection_bound: float = REFLECTION_BOUND
    inner_tol: float = 1e-12

    def __post_init__(self):
        if self.omega_domain not in (SYMBOL_DOMAIN, NONNEGATIVE_DOMAIN):
            raise InvalidInputError(f"unknown omega domain {self.omega_domain!r}")
        if not 0 < self.reflection_bound < 1:
            raise InvalidInputError("reflection_bound must lie in (0, 1)")


DEFAULT_CONFIG = RateConfig()


@dataclass
class RateResult:
    rate: float
    raw_rate: float
    ensemble: str
    inner_argmin: np.ndarray
    outer_argmax: np.ndarray | None = None
    phi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eta2: float = float("nan")
    quadrature_points: int = 0
    status: str = CONVERGED
    inner_value: float = float("nan")

    def as_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v]
            return v
        return {k: conv(v) for k, v in self.__dict__.items()}


def _cross_term(alpha: np.ndarray, h: np.ndarray, gamma: np.ndarray) -> float:
    """``sum_{l,i} alpha_l h_i gamma_{|l-i|}``."""
    K = alpha.size - 1
    lags = np.abs(np.subtract.outer(np.arange(K + 1), np.arange(K + 1)))
    return float(alpha @ gamma[lags] @ h)


def _output_spectrum(h, phi, eta2, sigma2, nu):
    s_x = eta2 / np.abs(1.0 - ar_response(phi, nu)) ** 2
    return np.abs(freq_response(h, nu)) ** 2 * s_x + sigma2


# ---------------------------------------------------------------------------
# autoregressive ensemble


class ArInnerProblem:
    """``J(w) = -<log f_w>/2 + w^2 <S_Y |A|^2 / f_w>/4 - w B`` with ``<.>`` the
    normalised integral and ``f_w = w|A|^2/2 + |1 - Phi|^2/(2 eta2)``."""

    def __init__(self, channel: ChannelModel, metric: DecoderMetric, phi, n_points: int = DEFAULT_POINTS):
        h, alpha = align(channel, metric)
        if not np.any(alpha != 0):
            raise InvalidInputError("metric taps are all zero")
        self.phi = armodel.ArParams.from_phi(phi, channel.p_x, n_points)
        K = h.size - 1
        self.gamma = armodel.autocov_from_ar(self.phi, K)
        nu = frequency_grid(n_points)
        self.a2 = np.abs(freq_response(alpha, nu)) ** 2
        self.bracket = np.abs(1.0 - ar_response(self.phi.phi, nu)) ** 2 / (2.0 * self.phi.eta2)
        self.weight = _output_spectrum(h, self.phi.phi, self.phi.eta2, channel.sigma2, nu) * self.a2
        quad = 0.5 * float(np.dot(alpha, alpha)) * self.gamma[0]
        quad += sum(tap_correlation(alpha, l) * self.gamma[l] for l in range(1, K + 1))
        self.linear = _cross_term(alpha, h, self.gamma) - quad
        self.n_points = n_points

    def __call__(self, w: float) -> float:
        f = 0.5 * w * self.a2 + self.bracket
        return -0.5 * float(np.mean(np.log(f))) + 0.25 * w * w * float(np.mean(self.weight / f)) - w * self.linear

    def derivative(self, w: float) -> float:
        f = 0.5 * w * self.a2 + self.bracket
        return (-0.25 * float(np.mean(self.a2 / f)) + 0.5 * w * float(np.mean(self.weight / f))
                - 0.125 * w * w * float(np.mean(self.weight * self.a2 / f ** 2)) - self.linear)

    def offset(self) -> float:
        return 0.5 * math.log(2.0 * self.phi.eta2)


def rate_ar_fixed(channel: ChannelModel, metric: DecoderMetric, phi=(), config: RateConfig = DEFAULT_CONFIG) -> RateResult:
    """Rate of the AR ensemble with fixed coefficients ``phi`` (empty = i.i.d.)."""
    prob = ArInnerProblem(channel, metric, phi, config.n_points)
    res = minimize_scalar_convex(prob, 0.0, (0.0, 1.0), tol=1e-10)
    if res.status == INFEASIBLE:
        raise InfeasibleError("AR inner problem has no finite value")
    raw = prob.offset() - res.value
    name = f"ar{prob.phi.order}" if prob.phi.order else "iid"
    return RateResult(max(0.0, raw), raw, name, res.x, None, prob.phi.phi, prob.gamma, prob.phi.eta2,
                      config.n_points, res.status, res.value)


def rate_ar_opt(channel: ChannelModel, metric: DecoderMetric, p: int, config: RateConfig = DEFAULT_CONFIG) -> RateResult:
    """Best AR(p) ensemble, searched over reflection coefficients in a box."""
    if p < 0 or p > 4:
        raise InvalidInputError(f"AR order must be in 0..4, got {p}")
    if p == 0:
        return rate_ar_fixed(channel, metric, (), config)

    def score(kappa):
        return rate_ar_fixed(channel, metric, armodel.phi_from_reflection(kappa), config).raw_rate

    b = config.reflection_bound
    outer = maximize_outer(score, [(-b, b)] * p, resolution=config.grid_points, refine=config.refine)
    if not math.isfinite(outer.value):
        raise InfeasibleError("no feasible AR coefficients")
    best = rate_ar_fixed(channel, metric, armodel.phi_from_reflection(outer.x), config)
    best.outer_argmax = best.phi.copy()
    best.ensemble = f"ar{p}"
    best.status = _combine(best.status, outer.status)
    return best


# ---------------------------------------------------------------------------
# fixed-composition ensemble


class FcInnerProblem:
    """Inner problem of the fixed-composition rate.

    Variables are ``(w_0, ..., w_p, v)``: lag multipliers and the metric
    multiplier ``v``.  With ``g = sum_k w_k cos(k nu) + v e(nu)`` and
    ``e(nu) = sum_{k > min(p, K)} Pi_k(alpha) cos(k nu)``,

        J = -<log g>/2 + v^2 <S_Y |A|^2 / g>/4 - v B + sum_k w_k gamma_k.
    """

    def __init__(self, channel: ChannelModel, metric: DecoderMetric, gamma, n_points: int = DEFAULT_POINTS,
                 domain: str = SYMBOL_DOMAIN):
        h, alpha = align(channel, metric)
        if not np.any(alpha != 0):
            raise InvalidInputError("metric taps are all zero")
        gamma = armodel.as_taps(gamma, "gamma")
        if abs(gamma[0] - channel.p_x) > 1e-12 * channel.p_x:
            raise InvalidInputError(f"gamma_0 = {gamma[0]} must equal the input power {channel.p_x}")
        params = armodel.ar_from_autocov(gamma)  # raises on non-PD input
        self.p = p = gamma.size - 1
        K = h.size - 1
        self.gamma = armodel.extend_autocov(gamma, max(K, p))
        self.phi = params.phi
        self.eta2 = armodel.eta_squared(params.phi, channel.p_x, n_points)
        nu = frequency_grid(n_points)
        q = min(p, K)
        self.tail = [tap_correlation(alpha, k) for k in range(q + 1, K + 1)]
        e = np.zeros(n_points)
        for k, pi_k in zip(range(q + 1, K + 1), self.tail):
            e += pi_k * np.cos(k * nu)
        # rows: d g / d variable
        self.basis = np.vstack([np.cos(k * nu) for k in range(p + 1)] + [e])
        a2 = np.abs(freq_response(alpha, nu)) ** 2
        self.weight = _output_spectrum(h, params.phi, self.eta2, channel.sigma2, nu) * a2
        self.linear = _cross_term(alpha, h, self.gamma) - sum(
            pi_k * self.gamma[k] for k, pi_k in zip(range(q + 1, K + 1), self.tail))
        self.lag_gamma = self.gamma[: p + 1]
        self.domain = domain
        self.n_points = n_points

    @property
    def dim(self) -> int:
        return self.p + 2

    def symbol(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.basis

    def __call__(self, x) -> float:
        g = self.symbol(x)
        if not np.min(g) > 1e-300:
            return math.inf
        v = x[-1]
        return (-0.5 * float(np.mean(np.log(g))) + 0.25 * v * v * float(np.mean(self.weight / g))
                - v * self.linear + float(np.dot(x[:-1], self.lag_gamma)))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self.symbol(x)
        v = x[-1]
        n = g.size
        out = -0.5 * (self.basis @ (1.0 / g)) / n - 0.25 * v * v * (self.basis @ (self.weight / g ** 2)) / n
        out[:-1] += self.lag_gamma
        out[-1] += 0.5 * v * float(np.mean(self.weight / g)) - self.linear
        return out

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self.symbol(x)
        v = x[-1]
        n = g.size
        Z = self.basis
        H = 0.5 * (Z * (1.0 / g ** 2)) @ Z.T / n
        H += 0.5 * v * v * (Z * (self.weight / g ** 3)) @ Z.T / n
        cross = -0.5 * v * (Z @ (self.weight / g ** 2)) / n
        H[:, -1] += cross
        H[-1, :] += cross
        H[-1, -1] += 0.5 * float(np.mean(self.weight / g))
        return H

    def dominance_constraint(self) -> tuple[np.ndarray, np.ndarray]:
        row = np.zeros(self.dim)
        row[0] = 1.0
        row[1: self.p + 1] = -1.0
        row[-1] = -float(np.sum(np.abs(self.tail)))
        return row[None, :], np.zeros(1)

    def start(self) -> np.ndarray:
        x = np.zeros(self.dim)
        v = 0.1 if self.linear > 0 else 1e-3
        x[-1] = v
        if self.domain == NONNEGATIVE_DOMAIN:
            x[1: self.p + 1] = 1e-3
        x[0] = 1.0 / (2.0 * self.gamma[0]) + float(np.sum(x[1: self.p + 1])) + v * float(np.sum(np.abs(self.tail))) + 0.1
        return x

    def solve(self, tol: float = 1e-12) -> OptResult:
        if self.domain == NONNEGATIVE_DOMAIN:
            return minimize_vector_convex(self, self.start(), lower=np.zeros(self.dim),
                                          linear_constraints=self.dominance_constraint(),
                                          grad=self.gradient, hess=self.hessian, tol=tol)
        lower = np.full(self.dim, -np.inf)
        lower[-1] = 0.0
        return minimize_vector_convex(self, self.start(), lower=lower, grad=self.gradient, hess=self.hessian,
                                      tol=tol)

    def offset(self) -> float:
        return 0.5 * math.log(2.0 * math.e * self.eta2)


def rate_fc_fixed(channel: ChannelModel, metric: DecoderMetric, gamma=None,
                  config: RateConfig = DEFAULT_CONFIG) -> RateResult:
    """Rate of the fixed-composition ensemble with lag autocovariances ``gamma``.

    ``gamma`` defaults to ``(p_x,)`` (codewords on the sphere).
    """
    if gamma is None:
        gamma = (channel.p_x,)
    prob = FcInnerProblem(channel, metric, gamma, config.n_points, config.omega_domain)
    res = prob.solve(config.inner_tol)
    if res.status == INFEASIBLE:
        raise InfeasibleError(f"fixed-composition inner problem infeasible: {res.extra.get('reason', '')}")
    raw = prob.offset() - res.value
    return RateResult(max(0.0, raw), raw, f"fc{prob.p}", res.x, None, prob.phi, prob.gamma, prob.eta2,
                      config.n_points, res.status, res.value)


def rate_fc_opt(channel: ChannelModel, metric: DecoderMetric, p: int, config: RateConfig = DEFAULT_CONFIG) -> RateResult:
    """Best fixed-composition ensemble of order ``p`` (``gamma_0 = p_x`` fixed)."""
    if p < 0 or p > 4:
        raise InvalidInputError(f"ensemble order must be in 0..4, got {p}")
    if p == 0:
        return rate_fc_fixed(channel, metric, (channel.p_x,), config)

    def score(kappa):
        return rate_fc_fixed(channel, metric, armodel.gamma_from_reflection(kappa, channel.p_x), config).raw_rate

    b = config.reflection_bound
    outer = maximize_outer(score, [(-b, b)] * p, resolution=config.grid_points, refine=config.refine)
    if not math.isfinite(outer.value):
        raise InfeasibleError("no feasible autocovariance vector")
    best = rate_fc_fixed(channel, metric, armodel.gamma_from_reflection(outer.x, channel.p_x), config)
    best.outer_argmax = best.gamma[: p + 1].copy()
    best.status = _combine(best.status, outer.status)
    return best


# ---------------------------------------------------------------------------
# universal decoder


def rate_universal(channel: ChannelModel) -> RateResult:
    """Rate of the correlation (GLRT) decoder: the ISI part acts as extra noise."""
    h0 = float(channel.h[0])
    residual = (channel.energy - h0 * h0) * channel.p_x + channel.sigma2
    raw = 0.5 * math.log1p(h0 * h0 * channel.p_x / residual)
    return RateResult(raw, raw, "universal", np.zeros(0), quadrature_points=0)


def _combine(inner: str, outer: str) -> str:
    if inner == INFEASIBLE or outer == INFEASIBLE:
        return INFEASIBLE
    if inner not in (CONVERGED, BOUNDARY):
        return inner
    if outer not in (CONVERGED, BOUNDARY):
        return outer
    return inner


# ---------------------------------------------------------------------------
# ensembles by name and sweeps


_ENSEMBLE_RE = re.compile(r"^(iid|universal|ar(\d)|fc(\d))$")


def parse_ensemble(name: str) -> tuple[str, int]:
    m = _ENSEMBLE_RE.match(name.strip().lower())
    if not m:
        raise InvalidInputError(f"unknown ensemble {name!r}; use iid, universal, ar<p> or fc<p>")
    if m.group(1) == "iid":
        return "ar", 0
    if m.group(1) == "universal":
        return "universal", 0
    if m.group(2) is not None:
        return "ar", int(m.group(2))
    return "fc", int(m.group(3))


def evaluate_ensemble(name: str, channel: ChannelModel, metric: DecoderMetric,
                      config: RateConfig = DEFAULT_CONFIG) -> RateResult:
    """Optimised rate of a named ensemble (``iid``, ``ar1``, ``fc0``, ``fc1``, ``universal``...)."""
    kind, p = parse_ensemble(name)
    if kind == "universal":
        result = rate_universal(channel)
    elif kind == "ar":
        result = rate_ar_opt(channel, metric, p, config)
    else:
        result = rate_fc_opt(channel, metric, p, config)
    result.ensemble = name
    return result


@dataclass(frozen=True)
class SweepAxis:
    """Which coefficient varies: ``("alpha", k)`` or ``("h", k)``."""

    target: str
    index: int

    @classmethod
    def parse(cls, text: str) -> "SweepAxis":
        m = re.fullmatch(r"\s*(alpha|h)\s*(\d+)\s*", text)
        if not m:
            raise InvalidInputError(f"sweep axis must look like alpha0, alpha1, h1 ...; got {text!r}")
        return cls(m.group(1), int(m.group(2)))

    @property
    def label(self) -> str:
        return f"{self.target}{self.index}"

    def apply(self, channel: ChannelModel, metric: DecoderMetric, value: float):
        if self.target == "alpha":
            alpha = metric.padded(max(self.index + 1, metric.alpha.size)).copy()
            alpha[self.index] = value
            return channel, DecoderMetric(alpha)
        h = np.concatenate([channel.h, np.zeros(max(0, self.index + 1 - channel.h.size))])
        h[self.index] = value
        return replace(channel, h=h), metric


@dataclass
class SweepRow:
    axis: str
    value: float
    ensemble: str
    rate: float
    raw_rate: float
    status: str
    outer: str = ""
    error: str = ""


def _sweep_point(args):
    axis, value, ensemble, channel, metric, config = args
    ch, met = axis.apply(channel, metric, value)
    try:
        res = evaluate_ensemble(ensemble, ch, met, config)
    except (InvalidInputError, InfeasibleError, ArithmeticError) as exc:
        return SweepRow(axis.label, value, ensemble, math.nan, math.nan, INFEASIBLE, error=str(exc))
    outer = ""
    if res.outer_argmax is not None:
        outer = " ".join(f"{v:.10g}" for v in res.outer_argmax)
    return SweepRow(axis.label, value, ensemble, res.rate, res.raw_rate, res.status, outer)


def default_workers() -> int:
    env = os.environ.get("ISI_MISMATCH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidInputError(f"ISI_MISMATCH_THREADS must be an integer, got {env!r}") from None
    return 1


def sweep_rates(channel: ChannelModel, metric: DecoderMetric, axis: SweepAxis | str, values: Iterable[float],
                ensembles: Sequence[str], config: RateConfig = DEFAULT_CONFIG,
                workers: int | None = None) -> list[SweepRow]:
    """Evaluate every ensemble at every grid value; rows ordered by (value, ensemble).

    Failed points are recorded in the row (status ``infeasible`` plus the
    message) and the sweep carries on.
    """
    if isinstance(axis, str):
        axis = SweepAxis.parse(axis)
    for name in ensembles:
        parse_ensemble(name)
    jobs = [(axis, float(v), e, channel, metric, config) for v in values for e in ensembles]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(job) for job in jobs]


SWEEP_HEADER = ("axis", "value", "ensemble", "rate", "raw_rate", "status", "outer_argmax", "error")


def format_number(x: float) -> str:
    return f"{x:.10g}"


def sweep_to_csv(rows: Sequence[SweepRow], stream) -> None:
    import csv

    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow([r.axis, format_number(r.value), r.ensemble, format_number(r.rate),
                         format_number(r.raw_rate), r.status, r.outer, r.error])
