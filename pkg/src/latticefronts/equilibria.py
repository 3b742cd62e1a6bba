"""Random equilibria u*, v*, the auxiliary path h, and hypothesis checks.

All three paths solve linear (or linearizable) scalar ODEs. For the
logistic equation u' = u(a - b u) the reciprocal w = 1/u satisfies
w' = -a w + b, so every path here reduces to

    w' = -rate(t) w + forcing(t)

whose bounded entire solution is the pullback integral of the forcing.
We march the exact one-cell propagator of that linear ODE across a uniform
grid, starting from w = 0 far enough in the past that the truncation has
decayed below tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .env import Medium, mean_estimate
from .errors import HypothesisError
from .quadrature import PrefixIntegral, gauss_nodes

DT_EQ = 1e-2
TOL_EQ = 1e-8


@dataclass(frozen=True)
class EquilibriumPath:
    """Tabulated positive path with cubic Hermite interpolation.

    Derivatives at the grid points come from the ODE itself, so the
    interpolant is C1 with O(dt^4) error.
    """

    t0: float
    dt: float
    values: np.ndarray = field(repr=False)
    derivs: np.ndarray = field(repr=False)
    depth: float = 0.0
    name: str = ""

    @property
    def t1(self) -> float:
        return self.t0 + self.dt * (len(self.values) - 1)

    @property
    def grid(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        pos = (t - self.t0) / self.dt
        n = len(self.values) - 1
        if np.any(pos < -1e-7) or np.any(pos > n + 1e-7):
            raise ValueError(f"{self.name or 'path'}: time outside [{self.t0}, {self.t1}]")
        j = np.clip(np.floor(pos).astype(np.int64), 0, n - 1)
        return j, np.clip(pos - j, 0.0, 1.0)

    def __call__(self, t):
        j, s = self._locate(t)
        y0, y1 = self.values[j], self.values[j + 1]
        d0, d1 = self.derivs[j] * self.dt, self.derivs[j + 1] * self.dt
        s2 = s * s
        s3 = s2 * s
        return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0
                + (3 * s2 - 2 * s3) * y1 + (s3 - s2) * d1)

    def derivative(self, t):
        j, s = self._locate(t)
        y0, y1 = self.values[j], self.values[j + 1]
        d0, d1 = self.derivs[j] * self.dt, self.derivs[j + 1] * self.dt
        s2 = s * s
        return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * d0
                + (6 * s - 6 * s2) * y1 + (3 * s2 - 2 * s) * d1) / self.dt

    def sup(self) -> float:
        return float(self.values.max())

    def inf(self) -> float:
        return float(self.values.min())


def _grid(t_lo: float, t_hi: float, dt: float):
    n = int(math.ceil((t_hi - t_lo) / dt - 1e-9))
    return t_lo + dt * np.arange(n + 1)


def solve_linear_pullback(rate, forcing, t_lo: float, t_hi: float, depth: float,
                          dt: float = DT_EQ, nodes: int = 5):
    """Bounded solution of w' = -rate(t) w + forcing(t) on a grid over [t_lo, t_hi].

    Starts from w = 0 at t_lo - depth. Each cell uses the exact variation
    of constants formula, with both nested integrals by Gauss-Legendre.
    Returns (grid, w) restricted to [t_lo, t_hi].
    """
    npb = int(math.ceil(depth / dt))
    grid = _grid(t_lo - npb * dt, t_hi, dt)
    left = grid[:-1]
    x, w = gauss_nodes(nodes)
    ncell = len(left)
    E = np.empty(ncell)
    F = np.empty(ncell)
    chunk = 50_000
    for k in range(0, ncell, chunk):
        tl = left[k:k + chunk, None]
        # integral of the rate over the whole cell and up to each node
        full = dt * (rate(tl + dt * x) @ w)
        inner = (dt * x)[None, :, None] * w[None, None, :]
        pts = tl[:, :, None] + (dt * x)[None, :, None] * x[None, None, :]
        partial = np.sum(rate(pts) * inner, axis=-1)
        E[k:k + chunk] = np.exp(-full)
        weights = np.exp(-(full[:, None] - partial))
        F[k:k + chunk] = dt * ((forcing(tl + dt * x) * weights) @ w)
    vals = kernels.linear_recurrence(E, F, 0.0)
    return grid[npb:], vals[npb:]


def _decay_least_mean(rate, t_lo, t_hi, name):
    span = max(t_hi - t_lo, 1.0)
    r = min(50.0, span / 2)
    # only sets the pullback depth, so a coarse window grid is enough
    est = mean_estimate(None, rate, span, r, "least", t0=t_lo, step=min(0.1, r / 4))
    if est.value <= 0:
        raise HypothesisError(f"{name}: least mean of the decay rate is {est.value:.4g} <= 0 on the horizon")
    return est.value


def _pullback_with_doubling(rate, forcing, t_lo, t_hi, depth, dt, tol, name, check=True):
    if depth is None:
        # the decay rate may dip below its mean, so measure it on the stretch
        # behind the horizon start as well
        probe = _decay_least_mean(rate, t_lo - 200.0, t_hi, name)
        depth = 25.0 / probe
    g, w = solve_linear_pullback(rate, forcing, t_lo, t_hi, depth, dt)
    if check:
        _, w2 = solve_linear_pullback(rate, forcing, t_lo, t_hi, 2 * depth, dt)
        gap = float(np.max(np.abs(w - w2)))
        if gap > 2 * tol * max(1.0, float(np.max(np.abs(w2)))):
            raise HypothesisError(f"{name}: pullback not converged (doubling gap {gap:.3g})")
        w = w2
        depth = 2 * depth
    return g, w, depth


def logistic_equilibrium(medium: Medium, a: str, b: str, horizon, dt: float = DT_EQ,
                         tol: float = TOL_EQ, depth: Optional[float] = None,
                         check: bool = True) -> EquilibriumPath:
    """Bounded entire positive solution of u' = u(a(t) - b(t) u) on ``horizon``."""
    t_lo, t_hi = horizon
    fa, fb = medium.path(a), medium.path(b)
    if medium.is_constant():
        # exact: the equilibrium is the constant a/b
        grid = _grid(t_lo, t_hi, dt)
        av, bv = float(fa(grid[:1])[0]), float(fb(grid[:1])[0])
        if not av > 0:
            raise HypothesisError(f"(H1) violated: {a} = {av:g} is not positive")
        return EquilibriumPath(float(grid[0]), dt, np.full(len(grid), av / bv), np.zeros(len(grid)),
                               0.0, f"{a}/{b} equilibrium")
    try:
        grid, w, depth = _pullback_with_doubling(fa, fb, t_lo, t_hi, depth, dt, tol, f"{a}", check)
    except HypothesisError as exc:
        raise HypothesisError(f"(H1) violated: {exc}") from exc
    if np.any(w <= 0):
        raise HypothesisError(f"(H1) violated: {a} equilibrium not positive")
    u = 1.0 / w
    du = u * (fa(grid) - fb(grid) * u)
    return EquilibriumPath(float(grid[0]), dt, u, du, depth, f"{a}/{b} equilibrium")


def aux_h(medium: Medium, v_star: EquilibriumPath, u_star: Optional[EquilibriumPath] = None,
          horizon=None, dt: float = DT_EQ, tol: float = TOL_EQ, depth: Optional[float] = None,
          check: bool = True) -> EquilibriumPath:
    """Bounded positive solution of h' = kappa(t) h + b2(t) v*(t).

    kappa = (a2 - 2 c2 v*) - (a1 - c1 v*), negative under (H3).
    """
    if horizon is None:
        horizon = (v_star.t0 + 250.0, v_star.t1)
    t_lo, t_hi = horizon
    a1, c1, a2, b2, c2 = (medium.path(n) for n in ("a1", "c1", "a2", "b2", "c2"))

    def rate(t):
        vs = v_star(t)
        return (a1(t) - c1(t) * vs) - (a2(t) - 2.0 * c2(t) * vs)

    def forcing(t):
        return b2(t) * v_star(t)

    g = _grid(t_lo - 0.0, t_hi, dt)
    if np.min(rate(g)) <= 0:
        raise HypothesisError("(H3) violated: growth rate of h is not negative on the horizon")
    if medium.is_constant():
        h0 = float(forcing(g[:1])[0] / rate(g[:1])[0])
        return EquilibriumPath(float(g[0]), dt, np.full(len(g), h0), np.zeros(len(g)), 0.0, "h")
    if depth is None:
        # rate bounded below by inf b2 * v* > 0 under (H3); use its least mean
        depth = 25.0 / _decay_least_mean(rate, t_lo, t_hi, "h")
    room = t_lo - v_star.t0
    depth = min(depth, room / 2 if check else room)
    grid, w, depth = _pullback_with_doubling(rate, forcing, t_lo, t_hi, depth, dt, tol, "h", check)
    dh = -rate(grid) * w + forcing(grid)
    return EquilibriumPath(float(grid[0]), dt, w, dh, depth, "h")


class Equilibria:
    """u*, v*, h and lambda = a1 - c1 v* on a common horizon."""

    def __init__(self, medium: Medium, horizon, dt: float = DT_EQ, tol: float = TOL_EQ,
                 mean_window: float = 50.0, check: bool = True, with_h: bool = True):
        t_lo, t_hi = map(float, horizon)
        self.medium = medium
        self.horizon = (t_lo, t_hi)
        self.dt = dt
        self.tol = tol
        self.mean_window = mean_window
        self.u_star = logistic_equilibrium(medium, "a1", "b1", (t_lo, t_hi), dt, tol, check=check)
        # v* is needed further back to seed the pullback of h
        self.v_star = logistic_equilibrium(medium, "a2", "c2", (t_lo - 250.0, t_hi), dt, tol, check=check)
        self.h = aux_h(medium, self.v_star, horizon=(t_lo, t_hi), dt=dt, tol=tol, check=check) if with_h else None
        self._lam_prefix = None
        self._lam_least = None

    def lambda_at(self, t):
        t = np.asarray(t, dtype=float)
        return self.medium.sample("a1", t) - self.medium.sample("c1", t) * self.v_star(t)

    @property
    def lambda_prefix(self) -> PrefixIntegral:
        if self._lam_prefix is None:
            t_lo, t_hi = self.horizon
            self._lam_prefix = PrefixIntegral(self.lambda_at, t_lo, t_hi, self.dt)
        return self._lam_prefix

    def lambda_integral(self, t):
        """Integral of lambda from 0 to t (0 must lie in the horizon)."""
        return self.lambda_prefix(t) - self.lambda_prefix(np.array(0.0))

    def lambda_least(self, window: Optional[float] = None) -> float:
        if window is None and self._lam_least is not None:
            return self._lam_least
        val = lambda_path(self, window)[1]
        if window is None:
            self._lam_least = val
        return val


def lambda_path(eq: Equilibria, window: Optional[float] = None):
    """The path t -> a1 - c1 v* and its least mean over the equilibrium horizon."""
    t_lo, t_hi = eq.horizon
    r = window if window is not None else min(eq.mean_window, (t_hi - t_lo) / 2)
    est = mean_estimate(None, eq.lambda_at, t_hi - t_lo, r, "least", t0=t_lo, step=eq.dt)
    if eq.medium.is_constant():
        # exact for constants; avoids reporting quadrature roundoff
        return eq.lambda_at, float(eq.lambda_at(np.array([t_lo]))[0])
    return eq.lambda_at, est.value


# --------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisReport:
    lambda1_least: float
    lambda2_least: float
    h2_instability: float
    h2_stability: float
    h3_margin: dict
    h2_pointwise: dict
    verdicts: dict
    horizon: tuple
    window: float
    messages: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "lambda1_least": self.lambda1_least,
            "lambda2_least": self.lambda2_least,
            "h2_instability": self.h2_instability,
            "h2_stability": self.h2_stability,
            "h3_margin": self.h3_margin,
            "h2_pointwise": self.h2_pointwise,
            "verdicts": self.verdicts,
            "all_pass": self.all_pass,
            "horizon": list(self.horizon),
            "window": self.window,
            "messages": self.messages,
        }


def _least(medium, path, T, r, t0, mode="least", step=DT_EQ):
    return mean_estimate(None, path, T, r, mode, t0=t0, step=step).value


def check_hypotheses(medium: Medium, horizon=(0.0, 500.0), scan_step: float = DT_EQ,
                     window: float = 50.0, tol: float = 1e-12):
    """Evaluate (H1)-(H3) on the horizon.

    Returns ``(report, equilibria)``; equilibria is None when (H1) fails
    and the equilibria cannot be formed.
    """
    t_lo, t_hi = map(float, horizon)
    T = t_hi - t_lo
    r = min(window, T)
    msgs = []
    exact = medium.is_constant()
    a1, a2 = medium.path("a1"), medium.path("a2")
    if exact:
        l1, l2 = medium.coeffs_at(t_lo).a1, medium.coeffs_at(t_lo).a2
    else:
        l1 = _least(medium, a1, T, r, t_lo, step=scan_step)
        l2 = _least(medium, a2, T, r, t_lo, step=scan_step)
    verdicts = {"H1": bool(l1 > 0 and l2 > 0)}
    nan = float("nan")
    if not verdicts["H1"]:
        msgs.append("(H1) fails: least mean of a1 or a2 is not positive")
        verdicts.update(H2=False, H3=False)
        return HypothesisReport(l1, l2, nan, nan, {}, {}, verdicts, (t_lo, t_hi), r, msgs), None

    try:
        eq = Equilibria(medium, (t_lo, t_hi), dt=scan_step, mean_window=r, with_h=False)
    except HypothesisError as exc:
        msgs.append(str(exc))
        verdicts.update(H1=False, H2=False, H3=False)
        return HypothesisReport(l1, l2, nan, nan, {}, {}, verdicts, (t_lo, t_hi), r, msgs), None

    g = _grid(t_lo, t_hi, scan_step)
    co = medium.sample_all(g)
    us, vs = eq.u_star(g), eq.v_star(g)
    lam = co[0] - co[2] * vs
    stab_path = lambda t: medium.sample("a2", t) - medium.sample("b2", t) * eq.u_star(t)
    if exact:
        h2i = float(lam[0])
        h2s = float(co[3, 0] - co[4, 0] * us[0])
    else:
        h2i = _least(medium, eq.lambda_at, T, r, t_lo, step=scan_step)
        h2s = _least(medium, stab_path, T, r, t_lo, mode="greatest", step=scan_step)
    verdicts["H2"] = bool(h2i > 0 and h2s < 0)
    if not verdicts["H2"]:
        msgs.append(f"(H2) fails: instability {h2i:.6g} (needs > 0), stability {h2s:.6g} (needs < 0)")

    # the pointwise sufficient conditions of the remark following (H2)
    lo = {n: float(co[i].min()) for i, n in enumerate(("a1", "b1", "c1", "a2", "b2", "c2"))}
    hi = {n: float(co[i].max()) for i, n in enumerate(("a1", "b1", "c1", "a2", "b2", "c2"))}
    pointwise = {
        "a1L_minus_c1M_a2M_over_c2L": lo["a1"] - hi["c1"] * hi["a2"] / lo["c2"],
        "a1L_b2L_over_b1M_minus_a2M": lo["a1"] * lo["b2"] / hi["b1"] - hi["a2"],
    }
    pointwise["holds"] = bool(pointwise["a1L_minus_c1M_a2M_over_c2L"] > 0
                              and pointwise["a1L_b2L_over_b1M_minus_a2M"] >= 0)

    margin = {
        "inf_b2": float(co[4].min()),
        "b1_minus_c1": float((co[1] - co[2]).min()),
        "b2_minus_c2": float((co[4] - co[5]).min()),
        "lambda_minus_rhs": float((lam - (co[3] - 2 * co[5] * vs + co[4] * vs)).min()),
    }
    verdicts["H3"] = bool(margin["inf_b2"] > 0 and all(
        margin[k] >= -tol for k in ("b1_minus_c1", "b2_minus_c2", "lambda_minus_rhs")))
    if not verdicts["H3"]:
        bad = [k for k, v in margin.items() if (v <= 0 if k == "inf_b2" else v < -tol)]
        msgs.append("(H3) fails: " + ", ".join(f"{k}={margin[k]:.6g}" for k in bad))
    return HypothesisReport(l1, l2, h2i, h2s, margin, pointwise, verdicts, (t_lo, t_hi), r, msgs), eq


def build_equilibria(medium: Medium, horizon, **kw) -> Equilibria:
    """Equilibria after the hypothesis checks pass; raises HypothesisError otherwise."""
    rep, _ = check_hypotheses(medium, horizon, window=kw.get("mean_window", 50.0))
    if not rep.all_pass:
        raise HypothesisError("; ".join(rep.messages) or "hypotheses fail")
    return Equilibria(medium, horizon, **kw)
