"""Super/sub-solutions, pullback fronts and speed measurements.

Everything lives in the cooperative frame, where the front connects
(u*, v*) on the left to (0, 0) on the right. Write ``S(t)`` for the
integrated speed, ``xi = x - S(t)`` for the moving coordinate and
``lam(t) = a1 - c1 v*``.

Super-solution: (min(u*, e^{-mu xi}), min(v*, e^{-mu xi})).

Sub-solution: for xi right of the cap point,

    u = e^{-mu xi} - d e^{(mt/mu - 1) A(t) - mt xi},   v = sigma h(t) u,

and flat at its maximum to the left of the cap point. ``A`` is a bounded
path with (1 - delta) lam + A' >= K pointwise, where K depends only on
mu and mt (the second decay rate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dispersion import SpeedPath, critical_speed, decay_rates_for_speed, mu_tilde_rule
from .equilibria import Equilibria
from .errors import AnsatzError, NumericalAbort
from .solver import IntegratorOptions, LatticeState, integrate_many

TOL_PB = 1e-4
TOL_MONO = 1e-9


def _exp_gap(mu: float) -> float:
    """e^mu + e^-mu - 2, written to stay accurate for small mu."""
    return 4.0 * math.sinh(mu / 2.0) ** 2


def k_constant(mu: float, mt: float) -> float:
    return (mu * _exp_gap(mt) - mt * _exp_gap(mu)) / (mt - mu)


# --------------------------------------------------------------------------
# the ansatz


@dataclass
class WaveAnsatz:
    eq: Equilibria
    gamma: float
    mu: float
    mu_tilde: float
    mu_star: float
    lambda_least: float
    delta: float
    K: float
    a_mode: str
    block: float
    edges: np.ndarray = field(repr=False)
    block_means: np.ndarray = field(repr=False)
    a_norm: float = 0.0
    d_omega: float = 0.0
    d: float = 0.0
    sigma: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.S = SpeedPath(self.eq, self.mu)
        self._kh = (1 - self.delta) * self.lambda_least

    # -- paths

    def A(self, t):
        t = np.asarray(t, dtype=float)
        lam_int = self.eq.lambda_prefix(t)
        if self.a_mode == "compensated":
            return self._kh * t - (1 - self.delta) * (lam_int - self.eq.lambda_prefix(np.array(0.0)))
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.block_means) - 1)
        e = self.edges[k]
        return (1 - self.delta) * ((t - e) * self.block_means[k] - (lam_int - self.eq.lambda_prefix(e)))

    def A_prime(self, t):
        t = np.asarray(t, dtype=float)
        lam = self.eq.lambda_at(t)
        if self.a_mode == "compensated":
            return self._kh - (1 - self.delta) * lam
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.block_means) - 1)
        return (1 - self.delta) * (self.block_means[k] - lam)

    @property
    def _shift_const(self) -> float:
        return (math.log(self.d) + math.log(self.mu_tilde) - math.log(self.mu)) / (self.mu_tilde - self.mu)

    def x_omega(self, t):
        """Location of the sub-solution maximum."""
        return self.S(t) + self._shift_const + self.A(t) / self.mu

    def zero_crossing(self, t):
        return self.S(t) + math.log(self.d) / (self.mu_tilde - self.mu) + self.A(t) / self.mu

    def cap(self, t):
        """Sub-solution u-maximum, e^{-mu xi_w} (1 - mu/mt)."""
        xi_w = self._shift_const + self.A(t) / self.mu
        return np.exp(-self.mu * xi_w) * (1.0 - self.mu / self.mu_tilde)

    # -- evaluation

    def super_solution_at(self, x, t: float):
        x = np.asarray(x, dtype=float)
        s = float(self.S(np.array(t)))
        expo = np.minimum(-self.mu * (x - s), 700.0)
        hat = np.exp(expo)
        us = float(self.eq.u_star(np.array(t)))
        vs = float(self.eq.v_star(np.array(t)))
        return np.minimum(us, hat), np.minimum(vs, hat)

    def _tilde(self, xi, a_t):
        ratio = self.mu_tilde / self.mu - 1.0
        expo = np.minimum(-self.mu * xi, 700.0)
        corr = self.d * np.exp(np.minimum(ratio * a_t - (self.mu_tilde - self.mu) * xi, 700.0))
        return np.exp(expo) * (1.0 - corr)

    def sub_solution_at(self, x, t: float):
        x = np.asarray(x, dtype=float)
        tt = np.array(t, dtype=float)
        s = float(self.S(tt))
        a_t = float(self.A(tt))
        xi_w = self._shift_const + a_t / self.mu
        xi = np.maximum(x - s, xi_w)
        u = self._tilde(xi, a_t)
        u = np.maximum(u, 0.0)
        v = self.sigma * float(self.eq.h(tt)) * u
        return u, v

    # -- differential inequality residuals (for verification)

    def super_defect(self, x, t: float):
        """Residual d/dt - (H + reaction) of the super-solution; should be >= 0.

        Neighbors use the actual (capped) values; time derivatives are those
        of the active branch.
        """
        x = np.asarray(x, dtype=float)
        u0, v0 = self.super_solution_at(x, t)
        um, vm = self.super_solution_at(x - 1, t)
        up, vp = self.super_solution_at(x + 1, t)
        tt = np.array(t)
        a1, b1, c1, a2, b2, c2 = self.eq.medium.sample_all(tt)
        us, vs = float(self.eq.u_star(tt)), float(self.eq.v_star(tt))
        c = float(self.S.speed(tt))
        hat = np.exp(np.minimum(-self.mu * (x - float(self.S(tt))), 700.0))
        du = np.where(hat < us, self.mu * c * hat, float(self.eq.u_star.derivative(tt)))
        dv = np.where(hat < vs, self.mu * c * hat, float(self.eq.v_star.derivative(tt)))
        fu = (up - 2 * u0 + um) + u0 * (a1 - b1 * u0 - c1 * (vs - v0))
        fv = (vp - 2 * v0 + vm) + b2 * (vs - v0) * u0 + v0 * (a2 - 2 * c2 * vs + c2 * v0)
        return du - fu, dv - fv

    def sub_defect(self, x, t: float):
        """Residual of the sub-solution right of the cap; should be <= 0."""
        x = np.asarray(x, dtype=float)
        tt = np.array(t)
        u0, v0 = self.sub_solution_at(x, t)
        um, vm = self.sub_solution_at(x - 1, t)
        up, vp = self.sub_solution_at(x + 1, t)
        a1, b1, c1, a2, b2, c2 = self.eq.medium.sample_all(tt)
        vs = float(self.eq.v_star(tt))
        h = float(self.eq.h(tt))
        dh = float(self.eq.h.derivative(tt))
        c = float(self.S.speed(tt))
        a_t, da = float(self.A(tt)), float(self.A_prime(tt))
        xi = x - float(self.S(tt))
        ratio = self.mu_tilde / self.mu - 1.0
        e1 = np.exp(-self.mu * xi)
        e2 = self.d * np.exp(ratio * a_t - self.mu_tilde * xi)
        du = self.mu * c * e1 - (ratio * da + self.mu_tilde * c) * e2
        dv = self.sigma * (dh * u0 + h * du)
        fu = (up - 2 * u0 + um) + u0 * (a1 - b1 * u0 - c1 * (vs - v0))
        fv = (vp - 2 * v0 + vm) + b2 * (vs - v0) * u0 + v0 * (a2 - 2 * c2 * vs + c2 * v0)
        return du - fu, dv - fv

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "mu": self.mu, "mu_tilde": self.mu_tilde, "mu_star": self.mu_star,
            "lambda_least": self.lambda_least, "delta": self.delta, "K": self.K,
            "a_mode": self.a_mode, "block": self.block, "a_norm": self.a_norm,
            "d_omega": self.d_omega, "d": self.d, "sigma": self.sigma,
            "breakpoints": self.edges.tolist() if len(self.edges) < 200 else len(self.edges),
            **self.diagnostics,
        }


def _block_edges(t_lo, t_hi, T_b):
    ks = np.arange(math.ceil(t_lo / T_b), math.floor(t_hi / T_b) + 1)
    inner = [k * T_b for k in ks if t_lo < k * T_b < t_hi]
    edges = [t_lo] + inner + [t_hi]
    # fold short partial blocks at either end into their neighbor
    if len(edges) > 2 and edges[1] - edges[0] < 0.5 * T_b:
        edges.pop(1)
    if len(edges) > 2 and edges[-1] - edges[-2] < 0.5 * T_b:
        edges.pop(-2)
    return np.array(edges)


def build_ansatz(eq: Equilibria, gamma: float, delta: float = 0.05, lambda_least: Optional[float] = None,
                 a_mode: str = "blocks", block: Optional[float] = None, cap: float = 50.0,
                 d: Optional[float] = None, eps_frac: float = 0.05) -> WaveAnsatz:
    """Assemble and verify the super/sub-solution data on the equilibrium horizon."""
    if not 0 < delta < 1:
        raise AnsatzError("delta must lie in (0, 1)")
    lam_ = eq.lambda_least() if lambda_least is None else float(lambda_least)
    if not lam_ > 0:
        raise AnsatzError(f"least mean of a1 - c1 v* is {lam_:.4g} <= 0")
    pair = decay_rates_for_speed(lam_, gamma)
    mu = pair.mu_minus
    mt = mu_tilde_rule(mu, pair.mu_star, eps_frac)
    K = k_constant(mu, mt)
    if not (1 - delta) * lam_ > K:
        raise AnsatzError(f"(1-delta) lambda = {(1 - delta) * lam_:.6g} does not exceed K = {K:.6g}")

    t_lo, t_hi = eq.horizon
    grid = eq.lambda_prefix.grid
    lam = eq.lambda_at(grid)
    if lam.min() <= 0:
        j = int(np.argmin(lam))
        raise AnsatzError(f"a1 - c1 v* not positive at t={grid[j]:.4g} ({lam[j]:.4g}); d_omega undefined")
    if a_mode == "blocks":
        if block is None:
            per = eq.medium.period()
            block = per if per else (eq.mean_window if per is None else 1.0)
        edges = _block_edges(t_lo, t_hi, block)
        P = eq.lambda_prefix(edges)
        means = np.diff(P) / np.diff(edges)
    elif a_mode == "compensated":
        block = float("nan")
        edges = np.array([t_lo, t_hi])
        means = np.array([lam_])
    else:
        raise AnsatzError(f"unknown A mode {a_mode!r}")

    anz = WaveAnsatz(eq, float(gamma), mu, mt, pair.mu_star, lam_, delta, K, a_mode, float(block),
                     edges, means)
    A = anz.A(grid)
    a_norm = float(np.max(np.abs(A)))
    if a_norm > cap:
        j = int(np.argmax(np.abs(A)))
        raise AnsatzError(f"|A| reaches {a_norm:.4g} > cap {cap} at t={grid[j]:.4g}")
    slack = (1 - delta) * lam + anz.A_prime(grid) - K
    if slack.min() < -1e-12:
        j = int(np.argmin(slack))
        raise AnsatzError(f"(1-delta) lambda + A' < K at t={grid[j]:.4g} (slack {slack[j]:.4g})")

    co = eq.medium.sample_all(grid)
    ratio = mt / mu - 1.0
    bmax = float(np.max(np.maximum(co[1], co[4]) / lam))
    d_omega = max(bmax * mu * math.exp(-ratio * a_norm) / (delta * (mt - mu)), math.exp(ratio * a_norm))
    anz.a_norm = a_norm
    anz.d_omega = d_omega
    anz.d = d_omega if d is None else float(d)
    if anz.d < d_omega:
        raise AnsatzError(f"d = {anz.d:.6g} is below d_omega = {d_omega:.6g}")

    caps = anz.cap(grid)
    us = eq.u_star(grid)
    if np.any(caps > us):
        raise AnsatzError("sub-solution cap exceeds u*")
    hs = eq.h(grid)
    vs = eq.v_star(grid)
    anz.sigma = float(min(1.0, 1.0 / hs.max(), vs.min() / (2.0 * hs.max() * caps.max())))
    anz.diagnostics = {
        "k_slack_min": float(slack.min()),
        "cap_max": float(caps.max()),
        "sigma_rule": "min(1, 1/sup h, inf v*/(2 sup h sup cap))",
        "vsub_over_vstar_max": float(np.max(anz.sigma * hs * caps / vs)),
    }
    return anz


# --------------------------------------------------------------------------
# pullback fronts


@dataclass
class FrontProfile:
    times: np.ndarray
    x: list
    U: list
    V: list
    S: np.ndarray
    taus: list
    gaps: list
    tau_violation: float
    converged: bool
    m: int
    phase: float
    sandwich: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    collar: int = 0

    def phi_tilde(self, j: int):
        """(xi, U, V) at the j-th time with xi = x - S(t)."""
        return self.x[j] - self.S[j], self.U[j], self.V[j]

    def max_uptick(self) -> float:
        """Largest increase between neighbouring samples, boundary collar excluded."""
        up = 0.0
        cut = self.collar * self.m
        for U, V in zip(self.U, self.V):
            if cut:
                U, V = U[cut:-cut], V[cut:-cut]
            up = max(up, float(np.max(np.diff(U), initial=0.0)), float(np.max(np.diff(V), initial=0.0)))
        return up

    @property
    def gap(self) -> float:
        return self.gaps[-1] if self.gaps else float("inf")


def _interleave(U, V, rows, m, first, offsets):
    """Rows (phase k) of one tau -> sorted x, U, V."""
    n = U.shape[1]
    order = np.argsort(offsets)
    x = (first + np.arange(n))[:, None] + np.asarray(offsets)[order][None, :]
    u = U[rows][order].T
    v = V[rows][order].T
    return x.ravel(), u.ravel(), v.ravel()


def pullback_front(anz: WaveAnsatz, eval_times: Sequence[float], taus=(25.0, 50.0, 100.0, 200.0),
                   m: int = 4, opts: Optional[IntegratorOptions] = None, tol_pb: float = TOL_PB,
                   tau_max: float = 800.0, n_sites: Optional[int] = None, phase: float = 0.0,
                   collar: int = 2, check_sandwich: bool = True, extend: bool = True) -> FrontProfile:
    """Pullback limit of solutions started from the super-solution at t = -tau.

    All tau-runs and all m sublattice phases are stepped together, so the
    deepest run and every shallower one share step sizes after the latter
    starts; ordering between them is then limited by roundoff only.
    """
    opts = opts or IntegratorOptions()
    eval_times = np.array(sorted(float(t) for t in eval_times))
    taus = sorted(float(t) for t in taus)
    if len(taus) < 2:
        raise ValueError("need at least two pullback depths")
    while True:
        prof = _ladder(anz, eval_times, taus, m, opts, n_sites, phase, collar, check_sandwich)
        if prof.gap < tol_pb or not extend or 2 * taus[-1] > tau_max:
            prof.converged = bool(prof.gap < tol_pb)
            return prof
        taus = taus + [2 * taus[-1]]


def _ladder(anz, eval_times, taus, m, opts, n_sites, phase, collar, check_sandwich):
    eq = anz.eq
    deepest = taus[-1]
    t_end = float(eval_times[-1])
    if -deepest < eq.horizon[0] or t_end > eq.horizon[1]:
        raise ValueError(f"equilibria horizon {eq.horizon} does not cover [-{deepest}, {t_end}]")
    mu = anz.mu
    s_start = float(anz.S(np.array(-deepest)))
    s_end = float(anz.S(np.array(t_end)))
    left_pad = int(math.ceil(40.0 / mu)) + 40
    # room for the tail probes at +-40/mu used by profile_limits
    right_pad = int(math.ceil(max(math.log(1.0 / opts.atol), 40.0) / mu)) + opts.margin
    first = int(math.floor(min(s_start, s_end))) - left_pad
    n_needed = int(math.ceil(max(s_start, s_end))) + right_pad - first
    n = max(n_needed, n_sites or 0)
    offsets = [phase + k / m for k in range(m)]
    x_rows = [first + np.arange(n) + off for off in offsets]

    def seed_rows(t):
        rows = []
        for x in x_rows:
            u, v = anz.super_solution_at(x, t)
            rows.append(LatticeState(u, v, t, first, x[0] - first, "cooperative"))
        return rows

    # march the ladder from the deepest start; add m rows at every -tau
    starts = sorted(taus, reverse=True)
    states = seed_rows(-starts[0])
    stats = {"accepted": 0, "rejected": 0, "seed_projection": 0.0}
    for k, tau in enumerate(starts):
        t0 = -tau
        last = k == len(starts) - 1
        t1 = t_end if last else -starts[k + 1]
        t_eval = eval_times if last else [t1]
        trajs = integrate_many("cooperative", eq.medium, states, t0, t1, opts, t_eval, eq)
        stats["accepted"] += trajs[0].stats["accepted"]
        stats["rejected"] += trajs[0].stats["rejected"]
        if not last:
            fresh = seed_rows(t1)
            # the running rows lie below the super-solution up to integration
            # error in the far tail; project them so the new rows start
            # exactly ordered (otherwise the tail error is amplified as the
            # front sweeps through it)
            kept = [tr.states[-1] for tr in trajs]
            for st in kept:
                ub, vb = anz.super_solution_at(st.x, t1)
                stats["seed_projection"] = max(stats["seed_projection"], float(np.max(st.u - ub)),
                                               float(np.max(st.v - vb)))
                np.minimum(st.u, ub, out=st.u)
                np.minimum(st.v, vb, out=st.v)
            states = kept + fresh
    # rows are grouped deepest-first in blocks of m
    ntau = len(starts)
    gaps = np.zeros(ntau - 1)
    viol = 0.0
    xs, Us, Vs = [], [], []
    sandwich = {"u_low": 0.0, "u_high": 0.0, "v_low": 0.0, "v_high": 0.0}
    sl = slice(collar, n - collar if collar else None)
    for j, t in enumerate(eval_times):
        U = np.stack([tr.states[j].u for tr in trajs])
        V = np.stack([tr.states[j].v for tr in trajs])
        for k in range(ntau - 1):
            deep = slice(k * m, (k + 1) * m)
            shallow = slice((k + 1) * m, (k + 2) * m)
            dU = U[shallow][:, sl] - U[deep][:, sl]
            dV = V[shallow][:, sl] - V[deep][:, sl]
            gaps[k] = max(gaps[k], float(np.max(np.abs(dU))), float(np.max(np.abs(dV))))
            viol = max(viol, -float(dU.min()), -float(dV.min()))
        x, u, v = _interleave(U, V, list(range(m)), m, first, offsets)
        xs.append(x)
        Us.append(u)
        Vs.append(v)
        if check_sandwich:
            inner = np.ones(n, dtype=bool)
            inner[:collar] = False
            if collar:
                inner[n - collar:] = False
            mask = np.repeat(inner, m)
            ub, vb = anz.super_solution_at(x, t)
            ul, vl = anz.sub_solution_at(x, t)
            sandwich["u_high"] = max(sandwich["u_high"], float(np.max((u - ub)[mask])))
            sandwich["v_high"] = max(sandwich["v_high"], float(np.max((v - vb)[mask])))
            sandwich["u_low"] = max(sandwich["u_low"], float(np.max((ul - u)[mask])))
            sandwich["v_low"] = max(sandwich["v_low"], float(np.max((vl - v)[mask])))
    if viol > 10 * opts.atol:
        raise NumericalAbort(f"pullback profiles not monotone in tau (violation {viol:.3g})")
    # gaps listed from shallow pairs to deep pairs: gaps[i] compares taus[i] and taus[i+1]
    gaps_up = list(gaps[::-1])
    stats.update(n_sites=n, first=first, rows=len(trajs))
    return FrontProfile(eval_times, xs, Us, Vs, anz.S(eval_times), list(taus), gaps_up, viol,
                        False, m, phase, sandwich, stats, collar)


# --------------------------------------------------------------------------
# positions and speeds


def front_position(x, values, level: float) -> float:
    """Linear-interpolated crossing of ``level`` by a non-increasing profile."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    above = np.flatnonzero(y >= level)
    if above.size == 0 or above[-1] == len(y) - 1:
        raise ValueError("level not crossed inside the window")
    i = above[-1]
    y0, y1 = y[i], y[i + 1]
    if y0 == y1:
        return float(x[i])
    return float(x[i] + (x[i + 1] - x[i]) * (y0 - level) / (y0 - y1))


def profile_positions(front: FrontProfile, eq: Equilibria, theta: float = 0.5, which: str = "u"):
    """X(t) at level theta * u*(t) (or theta * v*(t))."""
    out = np.empty(len(front.times))
    for j, t in enumerate(front.times):
        if which == "u":
            lvl = theta * float(eq.u_star(np.array(t)))
            out[j] = front_position(front.x[j], front.U[j], lvl)
        else:
            lvl = theta * float(eq.v_star(np.array(t)))
            out[j] = front_position(front.x[j], front.V[j], lvl)
    return out


@dataclass(frozen=True)
class SpeedMeasurement:
    level: float
    window: float
    estimate: float
    target: float
    argwindow: tuple

    @property
    def rel_error(self) -> float:
        return abs(self.estimate - self.target) / abs(self.target)


def least_mean_speed(times, X, r: float, target: float = float("nan"), level: float = 0.5) -> SpeedMeasurement:
    """Minimum slope (X(t) - X(s)) / (t - s) over sample pairs with t - s >= r."""
    times = np.asarray(times, dtype=float)
    X = np.asarray(X, dtype=float)
    if times[-1] - times[0] < r:
        raise ValueError("series shorter than the window")
    best, arg = math.inf, (math.nan, math.nan)
    for i in range(len(times)):
        ok = times - times[i] >= r - 1e-9
        if not ok.any():
            break
        slopes = (X[ok] - X[i]) / (times[ok] - times[i])
        j = int(np.argmin(slopes))
        if slopes[j] < best:
            best = float(slopes[j])
            arg = (float(times[i]), float(times[ok][j]))
    return SpeedMeasurement(level, float(r), best, float(target), arg)


def profile_limits(front: FrontProfile, eq: Equilibria, mu: float, anz: Optional[WaveAnsatz] = None):
    """Left/right tail diagnostics in the moving coordinate."""
    xl, xr = -40.0 / mu, 40.0 / mu
    left = right = 0.0
    ratio = []
    for j, t in enumerate(front.times):
        xi, U, V = front.phi_tilde(j)
        if not (xi[0] <= xl and xi[-1] >= xr):
            raise ValueError("window does not contain the tail probes")
        us = float(eq.u_star(np.array(t)))
        left = max(left, abs(float(np.interp(xl, xi, U)) - us))
        right = max(right, float(np.interp(xr, xi, U)))
        if anz is not None:
            # first sample right of the probe; interpolating an exponential
            # linearly would bias the ratio upward
            k = int(np.searchsorted(xi, xr))
            ub, _ = anz.super_solution_at(np.array([xi[k] + front.S[j]]), t)
            ratio.append(float(U[k]) / float(ub[0]))
    out = {"x_left": xl, "x_right": xr, "left_deviation": left, "right_value": right,
           "max_uptick": front.max_uptick()}
    if ratio:
        out["tail_ratio_min"] = min(ratio)
        out["tail_ratio_max"] = max(ratio)
    return out


# --------------------------------------------------------------------------
# stationarity


class FrontBuilder:
    """Builds pullback fronts with a fixed decay rate for any shift of a medium."""

    def __init__(self, gamma: float, lambda_least: float, delta: float = 0.05, m: int = 4,
                 taus=(25.0, 50.0, 100.0, 200.0), opts: Optional[IntegratorOptions] = None,
                 tol_pb: float = TOL_PB, mean_window: float = 50.0, check_sandwich: bool = False,
                 tau_max: float = 800.0):
        self.gamma = gamma
        self.lambda_least = lambda_least
        self.delta = delta
        self.m = m
        self.taus = tuple(taus)
        self.opts = opts or IntegratorOptions()
        self.tol_pb = tol_pb
        self.mean_window = mean_window
        self.check_sandwich = check_sandwich
        self.tau_max = tau_max

    def build(self, medium, eval_times, phase: float = 0.0):
        t_hi = max(eval_times) + 5.0
        eq = Equilibria(medium, (-self.tau_max - 5.0, t_hi), mean_window=self.mean_window)
        anz = build_ansatz(eq, self.gamma, self.delta, lambda_least=self.lambda_least)
        front = pullback_front(anz, eval_times, self.taus, self.m, self.opts, self.tol_pb,
                               tau_max=self.tau_max, phase=phase, check_sandwich=self.check_sandwich)
        return anz, front


def stationarity_check(builder: FrontBuilder, medium, t: float, phase: float = 0.0):
    """sup |Phi~(xi, t; medium) - Phi~(xi, 0; shift(medium, t))| over the common xi range."""
    anz1, f1 = builder.build(medium, [t], phase)
    s_t = float(f1.S[0])
    phase2 = (phase - s_t) % (1.0 / builder.m)
    anz2, f2 = builder.build(medium.shift(t), [0.0], phase2)
    xi1, U1, V1 = f1.phi_tilde(0)
    xi2, U2, V2 = f2.phi_tilde(0)
    lo, hi = max(xi1[0], xi2[0]), min(xi1[-1], xi2[-1])
    sel = (xi1 >= lo) & (xi1 <= hi)
    du = np.abs(U1[sel] - np.interp(xi1[sel], xi2, U2))
    dv = np.abs(V1[sel] - np.interp(xi1[sel], xi2, V2))
    return {"t": t, "residual": float(max(du.max(), dv.max())), "gap1": f1.gap, "gap2": f2.gap,
            "alignment": float(np.min(np.abs(np.subtract.outer(xi1[sel][:8], xi2)), axis=1).max())}


# --------------------------------------------------------------------------
# spreading from compact data


@dataclass
class SpreadReport:
    level: float
    times: np.ndarray
    right: np.ndarray
    left: np.ndarray
    slope_right: float
    slope_left: float
    stderr_right: float
    stderr_left: float
    c0: float
    final: Optional[LatticeState] = None
    slope_series: Optional[np.ndarray] = None

    @property
    def estimate(self) -> float:
        return self.slope_right

    def rel_error(self) -> float:
        return abs(self.estimate - self.c0) / self.c0

    def interior_deviation(self, eq: Equilibria, c: float) -> float:
        """sup over |i| <= c t of |u_i - u*| + |v_i - v*| at the final time."""
        st = self.final
        t = st.time
        sel = np.abs(st.x) <= c * t
        us = float(eq.u_star(np.array(t)))
        vs = float(eq.v_star(np.array(t)))
        return float(np.max(np.abs(st.u[sel] - us) + np.abs(st.v[sel] - vs)))

    def to_dict(self) -> dict:
        return {"level": self.level, "slope_right": self.slope_right, "slope_left": self.slope_left,
                "stderr_right": self.stderr_right, "stderr_left": self.stderr_left,
                "estimate": self.estimate, "c0": self.c0, "rel_error": self.rel_error()}


def _fit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(t) - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((t - t.mean()) ** 2)))
    return float(coef[0]), se


def spreading_speed(eq: Equilibria, horizon: float = 300.0, n_sites: int = 4000, halfwidth: int = 5,
                    amplitude: Optional[float] = None, level: Optional[float] = None, dt_out: float = 1.0,
                    opts: Optional[IntegratorOptions] = None, lambda_least: Optional[float] = None) -> SpreadReport:
    """Invasion from box data in the cooperative frame; slopes of the level crossings."""
    opts = opts or IntegratorOptions(boundary="trivial")
    if opts.boundary != "trivial":
        opts = IntegratorOptions(**{**opts.__dict__, "boundary": "trivial"})
    grid = eq.u_star.grid
    umin = float(eq.u_star(grid[(grid >= 0) & (grid <= horizon)]).min())
    level = 0.01 * umin if level is None else level
    amp = 0.5 * float(eq.u_star(np.array(0.0))) if amplitude is None else amplitude
    first = -(n_sites // 2)
    idx = first + np.arange(n_sites)
    u0 = np.where(np.abs(idx) <= halfwidth, amp, 0.0)
    st = LatticeState(u0, np.zeros(n_sites), 0.0, first, 0.0, "cooperative")
    times = np.arange(0.0, horizon + 0.5 * dt_out, dt_out)
    tr = integrate_many("cooperative", eq.medium, [st], 0.0, horizon, opts, times, eq)[0]
    right = np.empty(len(times))
    left = np.empty(len(times))
    for j, s in enumerate(tr.states):
        above = np.flatnonzero(s.u >= level)
        if above.size == 0:
            right[j] = left[j] = np.nan
            continue
        i = above[-1]
        if i + 1 >= s.n or above[0] == 0:
            raise NumericalAbort("spreading reached the window edge")
        right[j] = s.x[i] + (s.u[i] - level) / (s.u[i] - s.u[i + 1])
        k = above[0]
        left[j] = s.x[k] - (s.u[k] - level) / (s.u[k] - s.u[k - 1])
    sel = (times >= horizon / 2) & np.isfinite(right)
    sr, er = _fit(times[sel], right[sel])
    sl, el = _fit(times[sel], -left[sel])
    lam = eq.lambda_least() if lambda_least is None else lambda_least
    c0 = critical_speed(lam).c0
    slope_series = np.gradient(right, times)
    return SpreadReport(level, times, right, left, sr, sl, er, el, c0, tr.states[-1], slope_series)
