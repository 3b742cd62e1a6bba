"""Dispersion relation of the linearized invasion equation.

The speed of an exponential profile e^{-mu x} is

    f(mu) = (e^mu + e^-mu - 2 + lam) / mu = (4 sinh^2(mu/2) + lam) / mu,

which is strictly convex-like in the sense that its first-order condition

    g(mu) = mu (e^mu - e^-mu) - (e^mu + e^-mu - 2 + lam)

has derivative 2 mu cosh(mu) > 0, so f has a unique minimizer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import AnsatzError, NoSupercriticalRoot

TOL_OPT = 1e-10
BRACKET = (1e-4, 20.0)


def _numerator(mu, lam):
    return 4.0 * np.sinh(mu / 2.0) ** 2 + lam


def wave_speed_curve(lambda_least: float, mu):
    """(e^mu + e^-mu - 2 + lambda) / mu for mu > 0."""
    mu_arr = np.asarray(mu, dtype=float)
    if np.any(mu_arr <= 0):
        raise ValueError("mu must be positive")
    out = _numerator(mu_arr, lambda_least) / mu_arr
    return float(out) if out.ndim == 0 else out


def foc(lambda_least: float, mu: float) -> float:
    """First-order condition residual, zero at the critical decay rate."""
    return 2.0 * mu * math.sinh(mu) - 4.0 * math.sinh(mu / 2.0) ** 2 - lambda_least


@dataclass(frozen=True)
class SpeedReport:
    lambda_least: float
    c0: float
    mu_star: float
    foc_residual: float
    method: dict

    def to_dict(self):
        return {"lambda_least": self.lambda_least, "c0": self.c0, "mu_star": self.mu_star,
                "foc_residual": self.foc_residual, "method": self.method}


@dataclass(frozen=True)
class DecayPair:
    gamma: float
    mu_minus: float
    mu_plus: float
    mu_star: float


def critical_speed(lambda_least: float, tol: float = TOL_OPT) -> SpeedReport:
    """Minimum of the speed curve and its location.

    Golden-section search on a bracket that is widened if the minimum sits
    at an edge, then Newton on the first-order condition.
    """
    lam = float(lambda_least)
    if not lam > 0:
        raise AnsatzError(f"critical speed needs a positive least mean (got {lam:g})")
    lo, hi = BRACKET
    while foc(lam, hi) < 0:
        hi *= 2.0
    while foc(lam, lo) > 0:
        lo /= 2.0
    # the curve is unimodal on (lo, hi); the best sample of a log grid and
    # its neighbours form a valid three-point bracket
    grid = np.geomspace(lo, hi, 33)
    vals = np.array([wave_speed_curve(lam, m) for m in grid])
    k = int(np.clip(np.argmin(vals), 1, len(grid) - 2))
    res = minimize_scalar(lambda m: wave_speed_curve(lam, m), bracket=(grid[k - 1], grid[k], grid[k + 1]),
                          method="golden", tol=1e-8)
    mu = float(res.x)
    # safeguarded Newton on g; g' = 2 mu cosh mu > 0 and g is convex for mu > 0
    a, b = lo, hi
    for _ in range(60):
        g = foc(lam, mu)
        if g > 0:
            b = min(b, mu)
        else:
            a = max(a, mu)
        step = g / (2.0 * mu * math.cosh(mu))
        nxt = mu - step
        if not (a < nxt < b):
            nxt = 0.5 * (a + b)
        if abs(nxt - mu) <= 1e-15 * mu:
            mu = nxt
            break
        mu = nxt
    resid = abs(foc(lam, mu))
    if resid >= tol:
        mu = brentq(lambda m: foc(lam, m), a, b, xtol=1e-15, rtol=1e-15)
        resid = abs(foc(lam, mu))
    return SpeedReport(lam, wave_speed_curve(lam, mu), mu, resid,
                       {"bracket": [lo, hi], "search": "golden+newton", "tol_opt": tol})


def decay_rates_for_speed(lambda_least: float, gamma: float, tol: float = TOL_OPT) -> DecayPair:
    """The two positive roots of f(mu) = gamma, on either side of mu*."""
    rep = critical_speed(lambda_least, tol)
    if not gamma > rep.c0 + tol:
        raise NoSupercriticalRoot(
            f"no supercritical root: gamma={gamma:.12g} is not above c0={rep.c0:.12g} (+{tol:g})")
    lam = rep.lambda_least

    def excess(m):
        return _numerator(m, lam) - gamma * m

    # f > gamma near 0 (f ~ lam/mu) and for large mu
    lo = rep.mu_star
    while excess(lo) < 0 and lo > 1e-300:
        lo /= 2.0
    hi = rep.mu_star
    while excess(hi) < 0:
        hi *= 2.0
    m_minus = brentq(excess, lo, rep.mu_star, xtol=1e-15, rtol=1e-15)
    m_plus = brentq(excess, rep.mu_star, hi, xtol=1e-15, rtol=1e-15)
    return DecayPair(float(gamma), m_minus, m_plus, rep.mu_star)


def mu_tilde_rule(mu: float, mu_star: float, eps_frac: float = 0.05) -> float:
    """Second decay rate of the sub-solution, strictly inside (mu, min(2 mu, mu*))."""
    top = min(2.0 * mu, mu_star)
    return top - eps_frac * (top - mu)


def instantaneous_speed(medium, v_star, mu: float, t):
    """c(t) = (e^mu + e^-mu - 2 + a1(t) - c1(t) v*(t)) / mu."""
    t = np.asarray(t, dtype=float)
    lam = medium.sample("a1", t) - medium.sample("c1", t) * v_star(t)
    return (4.0 * math.sinh(mu / 2.0) ** 2 + lam) / mu


def speed_integral(medium, v_star, mu: float, t0: float, t1: float, tol: float = 1e-9) -> float:
    """Integral of the instantaneous speed over [t0, t1]."""
    return medium.integral(lambda t: instantaneous_speed(medium, v_star, mu, t), t0, t1, tol=tol)


class SpeedPath:
    """S(t) = integral of c from 0 to t, via the cached prefix integral of lambda."""

    def __init__(self, equilibria, mu: float):
        self.eq = equilibria
        self.mu = float(mu)
        self.base = 4.0 * math.sinh(self.mu / 2.0) ** 2 / self.mu

    def speed(self, t):
        return self.base + self.eq.lambda_at(t) / self.mu

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.base * t + self.eq.lambda_integral(t) / self.mu
