"""Slow, independent reference computations.

Nothing here imports the integrator, the equilibrium solver or the
dispersion module: right-hand sides are transcribed again, minima come
from brute-force grids and roots from plain bisection. The medium is only
used as a coefficient sampler.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass

import mpmath
import numpy as np

# --------------------------------------------------------------------------
# constant coefficients


@dataclass(frozen=True)
class ClosedForms:
    u_star: float
    v_star: float
    lam: float
    kappa: float
    h: float
    c0_scan: float
    mu_star_scan: float


def speed_curve_scan(lam: float, step: float = 1e-6, mu_max: float = 12.0, chunk: int = 2_000_000):
    """Minimum of (e^mu + e^-mu - 2 + lam)/mu on the grid step, 2 step, ..., mu_max."""
    best, arg = math.inf, math.nan
    n = int(mu_max / step)
    for k0 in range(1, n + 1, chunk):
        mu = step * np.arange(k0, min(k0 + chunk, n + 1), dtype=float)
        f = (np.exp(mu) + np.exp(-mu) - 2.0 + lam) / mu
        j = int(np.argmin(f))
        if f[j] < best:
            best, arg = float(f[j]), float(mu[j])
    return best, arg


def speed_curve_refined(lam: float, step: float = 1e-6):
    """Grid scan followed by a golden-section refinement inside the winning cell.

    The grid minimum alone is within ~f''(mu*) step^2 / 8 of the true minimum,
    which is already far below 1e-8 for step 1e-6.
    """
    c, mu = speed_curve_scan(lam, step)
    f = lambda m: (mpmath.e ** m + mpmath.e ** (-m) - 2 + lam) / m
    with mpmath.workdps(40):
        a, b = mpmath.mpf(mu - step), mpmath.mpf(mu + step)
        g = (mpmath.sqrt(5) - 1) / 2
        for _ in range(120):
            x1 = b - g * (b - a)
            x2 = a + g * (b - a)
            if f(x1) < f(x2):
                b = x2
            else:
                a = x1
        m = (a + b) / 2
        return float(f(m)), float(m)


def speed_curve_mp(lam: float, mu: float, dps: int = 50) -> float:
    with mpmath.workdps(dps):
        m = mpmath.mpf(mu)
        return float((mpmath.e ** m + mpmath.e ** (-m) - 2 + mpmath.mpf(lam)) / m)


def speed_roots_bisect(lam: float, gamma: float, mu_star: float):
    """Roots of the speed curve at level gamma by bisection on each branch."""
    def f(m):
        return (math.exp(m) + math.exp(-m) - 2.0 + lam) - gamma * m

    def bisect(a, b):
        fa = f(a)
        for _ in range(200):
            c = 0.5 * (a + b)
            fc = f(c)
            if (fc > 0) == (fa > 0):
                a, fa = c, fc
            else:
                b = c
        return 0.5 * (a + b)

    hi = mu_star
    while f(hi) < 0:
        hi *= 2
    return bisect(1e-12, mu_star), bisect(mu_star, hi)


def constant_reference(a1, b1, c1, a2, b2, c2, scan_step: float = 1e-6) -> ClosedForms:
    us = a1 / b1
    vs = a2 / c2
    lam = a1 - c1 * vs
    if lam <= 0:
        raise ValueError("lambda must be positive")
    kappa = (a2 - 2 * c2 * vs) - lam
    h = b2 * vs / (-kappa)
    c0, mu = speed_curve_scan(lam, scan_step)
    return ClosedForms(us, vs, lam, kappa, h, c0, mu)


def constant_ansatz_reference(lam: float, gamma: float, delta: float, bmax_over_lam: float,
                              eps_frac: float = 0.05):
    """K, mu, mu_tilde and d for a constant medium (A identically zero)."""
    _, mu_star = speed_curve_refined(lam)
    mu, _ = speed_roots_bisect(lam, gamma, mu_star)
    top = min(2 * mu, mu_star)
    mt = top - eps_frac * (top - mu)
    K = (mu * (math.exp(mt) + math.exp(-mt) - 2) - mt * (math.exp(mu) + math.exp(-mu) - 2)) / (mt - mu)
    d = max(bmax_over_lam * mu / (delta * (mt - mu)), 1.0)
    return {"mu": mu, "mu_star": mu_star, "mu_tilde": mt, "K": K, "d_omega": d,
            "lhs": (1 - delta) * lam}


# --------------------------------------------------------------------------
# fixed-step RK4 on the lattice


def _lattice_rhs(system, u, v, co, vs, ghosts):
    a1, b1, c1, a2, b2, c2 = co
    uL, vL, uR, vR = ghosts
    up = np.concatenate(([uL], u, [uR]))
    vp = np.concatenate(([vL], v, [vR]))
    Hu = up[2:] + up[:-2] - 2 * u
    Hv = vp[2:] + vp[:-2] - 2 * v
    if system == "competition":
        return (Hu + a1 * u - b1 * u * u - c1 * u * v,
                Hv + a2 * v - b2 * u * v - c2 * v * v)
    w = vs - v
    return (Hu + a1 * u - b1 * u * u - c1 * u * w,
            Hv + b2 * u * w + a2 * v - 2 * c2 * vs * v + c2 * v * v)


def fixed_step_trajectory(system, medium, u0, v0, t0, t1, dt, t_eval, ghosts, v_star=None):
    """Classical RK4 with a fixed step.

    ``ghosts(t)`` returns (uL, vL, uR, vR); ``v_star(t)`` is needed in the
    cooperative frame. Output times must be multiples of dt from t0.
    Coefficients are sampled once on the half-step grid.
    """
    nsteps = int(round((t1 - t0) / dt))
    half = t0 + 0.5 * dt * np.arange(2 * nsteps + 1)
    co = medium.sample_all(half)
    vs = np.zeros_like(half) if v_star is None else np.asarray(v_star(half))
    gh = np.array([ghosts(t) for t in half]) if callable(ghosts) else np.tile(ghosts, (len(half), 1))
    want = {int(round((t - t0) / dt)): t for t in t_eval}
    u, v = np.array(u0, dtype=float), np.array(v0, dtype=float)
    out = {}
    if 0 in want:
        out[want[0]] = (u.copy(), v.copy())
    for k in range(nsteps):
        i = 2 * k
        f = lambda uu, vv, j: _lattice_rhs(system, uu, vv, co[:, j], vs[j], gh[j])
        k1u, k1v = f(u, v, i)
        k2u, k2v = f(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, i + 1)
        k3u, k3v = f(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, i + 1)
        k4u, k4v = f(u + dt * k3u, v + dt * k3v, i + 2)
        u = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if k + 1 in want:
            out[want[k + 1]] = (u.copy(), v.copy())
    return out


def logistic_closed_form(u0: float, t: float, a: float = 1.0, b: float = 1.0) -> float:
    e = math.exp(a * t)
    return a * u0 * e / (a + b * u0 * (e - 1))


# --------------------------------------------------------------------------
# scalar ODEs by forward integration


def forward_equilibria(medium, t_start: float, t_end: float, dt: float = 2e-3, t_eval=()):
    """Integrate u' = u(a1 - b1 u), v' = v(a2 - c2 v) and the h-equation forward with RK4.

    Starts from u = a1-mean-ish value 1, v = 1, h = 0 at t_start and relies on
    the transient dying out before the requested output times.
    """
    n = int(round((t_end - t_start) / dt))
    half = t_start + 0.5 * dt * np.arange(2 * n + 1)
    a1, b1, c1, a2, b2, c2 = (np.asarray(x).tolist() for x in medium.sample_all(half))
    want = {int(round((t - t_start) / dt)): t for t in t_eval}

    def f(j, u, v, h):
        du = u * (a1[j] - b1[j] * u)
        dv = v * (a2[j] - c2[j] * v)
        kappa = (a2[j] - 2 * c2[j] * v) - (a1[j] - c1[j] * v)
        return du, dv, kappa * h + b2[j] * v

    u, v, h = 1.0, 1.0, 0.0
    out = {}
    for k in range(n):
        i = 2 * k
        k1 = f(i, u, v, h)
        k2 = f(i + 1, u + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], h + 0.5 * dt * k1[2])
        k3 = f(i + 1, u + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], h + 0.5 * dt * k2[2])
        k4 = f(i + 2, u + dt * k3[0], v + dt * k3[1], h + dt * k3[2])
        u += dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v += dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        h += dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if k + 1 in want:
            out[want[k + 1]] = (u, v, h)
    return out


# --------------------------------------------------------------------------
# window means


def window_mean_scan(path, T: float, r_grid, step: float = 1e-3, t0: float = 0.0):
    """Exhaustive least/greatest window means over all grid windows of length >= r.

    Prefix integrals by the composite trapezoid rule on the grid.
    """
    n = int(round(T / step))
    t = t0 + step * np.arange(n + 1)
    y = path(t)
    pref = np.concatenate(([0.0], np.cumsum(0.5 * step * (y[1:] + y[:-1]))))
    r_grid = list(r_grid)
    mins = {r: math.inf for r in r_grid}
    maxs = {r: -math.inf for r in r_grid}
    need = {r: int(math.ceil(r / step - 1e-9)) for r in r_grid}
    lo_need = min(need.values())
    for i in range(n + 1 - lo_need):
        j0 = i + lo_need
        avg = (pref[j0:] - pref[i]) / (step * np.arange(lo_need, n + 1 - i))
        # suffix extremes: windows of length >= L start at offset L - lo_need
        smin = np.minimum.accumulate(avg[::-1])[::-1]
        smax = np.maximum.accumulate(avg[::-1])[::-1]
        for r in r_grid:
            k = need[r] - lo_need
            if k < len(avg):
                mins[r] = min(mins[r], smin[k])
                maxs[r] = max(maxs[r], smax[k])
    return {"r": r_grid, "least": [mins[r] for r in r_grid], "greatest": [maxs[r] for r in r_grid]}


def trapezoid_integral(path, s: float, t: float, step: float = 1e-4) -> float:
    n = int(round((t - s) / step))
    x = np.linspace(s, t, n + 1)
    y = path(x)
    return float(np.sum(0.5 * (y[1:] + y[:-1])) * (t - s) / n)


# --------------------------------------------------------------------------
# fixtures


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def generate_fixtures(outdir: str, quick: bool = False) -> dict:
    """Write every frozen reference value used by the tests.

    Returns the manifest (also written as manifest.json).
    """
    from .env import canonical_periodic, canonical_quasi_periodic

    os.makedirs(outdir, exist_ok=True)
    fixtures = {}

    # dispersion
    inputs = {"lambdas": [0.25, 0.75, 1.0, 3.0], "step": 1e-6}
    rows = []
    for lam in inputs["lambdas"]:
        c_grid, mu_grid = speed_curve_scan(lam, inputs["step"])
        c_ref, mu_ref = speed_curve_refined(lam, inputs["step"])
        rows.append({"lambda": lam, "c0_scan": c_grid, "mu_star_scan": mu_grid,
                     "c0_refined": c_ref, "mu_star_refined": mu_ref})
    curve = [{"lambda": 0.75, "mu": m, "value": speed_curve_mp(0.75, m)} for m in (0.5, 1.0)]
    _, mstar = speed_curve_refined(0.75)
    mm, mp = speed_roots_bisect(0.75, 2.0, mstar)
    fixtures["dispersion"] = (inputs, {"critical": rows, "curve": curve,
                                       "roots": {"lambda": 0.75, "gamma": 2.0, "mu_minus": mm, "mu_plus": mp}})

    # canonical constants
    canon = (1.0, 1.0, 0.5, 0.5, 1.0, 1.0)
    cf = constant_reference(*canon)
    decoupled = constant_reference(1.0, 1.0, 0.0, 0.5, 1.0, 1.0, scan_step=1e-4)
    anz = constant_ansatz_reference(cf.lam, 2.0, 0.05, max(canon[1], canon[4]) / cf.lam)
    fixtures["constants"] = ({"coeffs": canon}, {"canonical": asdict(cf), "decoupled_lambda": decoupled.lam,
                                                 "ansatz_gamma2": anz,
                                                 "hypotheses": {"h2_instability": cf.lam,
                                                                "h2_stability": canon[3] - canon[4] * cf.u_star,
                                                                "h3_slack": cf.lam - (canon[3] - 2 * canon[5] * cf.v_star
                                                                                      + canon[4] * cf.v_star)}})

    # periodic equilibria by forward integration
    per = canonical_periodic(0.5)
    ts = [round(2 * math.pi * k / 16, 12) for k in range(17)]
    dt = 2e-3
    ts_grid = [round(t / dt) * dt for t in ts]
    fw = forward_equilibria(per, -200.0, 2 * math.pi + 0.1, dt, t_eval=ts_grid)
    fixtures["periodic_equilibria"] = (
        {"medium": per.to_dict(), "t_start": -200.0, "dt": dt},
        {"t": ts_grid, "u_star": [fw[t][0] for t in ts_grid], "v_star": [fw[t][1] for t in ts_grid],
         "h": [fw[t][2] for t in ts_grid]})

    per25 = canonical_periodic(0.25)
    fw = forward_equilibria(per25, -200.0, 2 * math.pi + 0.1, dt, t_eval=ts_grid)
    fixtures["periodic25_equilibria"] = (
        {"medium": per25.to_dict(), "t_start": -200.0, "dt": dt},
        {"t": ts_grid, "u_star": [fw[t][0] for t in ts_grid], "v_star": [fw[t][1] for t in ts_grid],
         "h": [fw[t][2] for t in ts_grid]})

    # window means
    sine = lambda t: 1.0 + 0.5 * np.sin(t)
    wm_in = {"path": "1+0.5 sin t", "T": 60.0, "r": [5.0, 10.0, 20.0], "step": 1e-2 if quick else 1e-3}
    fixtures["window_means"] = (wm_in, window_mean_scan(sine, wm_in["T"], wm_in["r"], wm_in["step"]))

    # integrator reference: competition lattice, quasi-periodic medium, fixed ghosts
    qp = canonical_quasi_periodic()
    rng = np.random.default_rng(20240611)
    n = 50
    u0 = np.clip(0.5 * (1 - np.tanh((np.arange(n) - 25) / 4.0)) + 0.05 * rng.random(n), 0, None)
    v0 = 0.5 * (1 + np.tanh((np.arange(n) - 25) / 4.0)) * 0.5 + 0.02 * rng.random(n)
    ghosts = (1.0, 0.0, 0.0, 0.5)
    dt_ref = 1e-4 if quick else 1e-5
    t_out = [0.5, 1.0, 1.5, 2.0]
    ref = fixed_step_trajectory("competition", qp, u0, v0, 0.0, 2.0, dt_ref, t_out, ghosts)
    fixtures["integrator_reference"] = (
        {"medium": qp.to_dict(), "u0": u0.tolist(), "v0": v0.tolist(), "ghosts": list(ghosts),
         "dt": dt_ref, "system": "competition"},
        {"t": t_out, "u": [ref[t][0].tolist() for t in t_out], "v": [ref[t][1].tolist() for t in t_out]})

    # scalar logistic
    fixtures["logistic"] = ({"u0": 0.1, "t": 5.0}, {"u": logistic_closed_form(0.1, 5.0)})

    manifest = {"fixtures": {}}
    for name, (inp, out) in fixtures.items():
        payload = {"inputs": inp, "outputs": out}
        path = os.path.join(outdir, f"{name}.json")
        with open(path, "w", newline="\n") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        manifest["fixtures"][name] = {"file": f"{name}.json", "input_sha256": _hash(inp), "sha256": digest}
    with open(os.path.join(outdir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest
