"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (also repeated in the
terminal summary). Expensive runs are shared through module fixtures.
"""
import contextlib
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, load_fixture
from latticefronts.dispersion import critical_speed, foc
from latticefronts.env import (CHANNELS, Medium, canonical_constant, canonical_periodic,
                               canonical_quasi_periodic)
from latticefronts.equilibria import Equilibria, check_hypotheses
from latticefronts.errors import NoSupercriticalRoot
from latticefronts.fronts import (FrontBuilder, build_ansatz, least_mean_speed,
                                  profile_positions, pullback_front, spreading_speed, stationarity_check)
from latticefronts.oracles import logistic_closed_form
from latticefronts.solver import IntegratorOptions, LatticeState, integrate, integrate_many

ATOL = IntegratorOptions().atol


@contextlib.contextmanager
def criterion(n: int, title: str):
    """Collects named checks; prints and records one verdict line."""
    checks = {}
    t0 = time.perf_counter()
    try:
        yield checks
    except Exception as exc:
        line = f"criterion {n}: FAIL {title} ({type(exc).__name__}: {exc})"
        print(line)
        ACCEPTANCE.append(line)
        raise
    elapsed = time.perf_counter() - t0
    failed = [k for k, (ok, _) in checks.items() if not ok]
    detail = ", ".join(f"{k}={v}" for k, (_, v) in checks.items())
    verdict = "PASS" if not failed else "FAIL"
    line = f"criterion {n}: {verdict} {title} [{elapsed:.1f}s] {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert not failed, f"failed checks: {failed}; {detail}"


def fmt(x):
    return f"{x:.3g}"


# --------------------------------------------------------------------------
# shared runs


@pytest.fixture(scope="module")
def constant_front():
    t0 = time.perf_counter()
    eq = Equilibria(canonical_constant(), (-805.0, 205.0))
    anz = build_ansatz(eq, 2.0)
    front = pullback_front(anz, np.arange(50.0, 201.0, 1.0), taus=(25, 50, 100, 200), n_sites=2000)
    return eq, anz, front, time.perf_counter() - t0


@pytest.fixture(scope="module")
def periodic_front():
    t0 = time.perf_counter()
    eq = Equilibria(canonical_periodic(0.25), (-805.0, 205.0))
    anz = build_ansatz(eq, 2.0)
    front = pullback_front(anz, np.arange(50.0, 201.0, 0.5), n_sites=2000)
    return eq, anz, front, time.perf_counter() - t0


@pytest.fixture(scope="module")
def constant_spread():
    t0 = time.perf_counter()
    eq = Equilibria(canonical_constant(), (-5.0, 305.0))
    rep = spreading_speed(eq, horizon=300.0, n_sites=4000)
    return eq, rep, time.perf_counter() - t0


# --------------------------------------------------------------------------


def test_criterion_01_dispersion_exactness():
    ref = load_fixture("dispersion")["outputs"]["critical"]
    with criterion(1, "dispersion exactness") as chk:
        t0 = time.perf_counter()
        worst_c = worst_mu = worst_foc = 0.0
        for row in ref:
            rep = critical_speed(row["lambda"])
            worst_c = max(worst_c, abs(rep.c0 - row["c0_scan"]))
            worst_mu = max(worst_mu, abs(rep.mu_star - row["mu_star_scan"]))
            worst_foc = max(worst_foc, abs(foc(row["lambda"], rep.mu_star)))
        dt = time.perf_counter() - t0
        chk["c0_err"] = (worst_c <= 1e-8, fmt(worst_c))
        chk["mu_err"] = (worst_mu <= 1e-5, fmt(worst_mu))
        chk["foc"] = (worst_foc < 1e-10, fmt(worst_foc))
        chk["runtime"] = (dt < 1.0, f"{dt:.3f}s")


def test_criterion_02_canonical_constants():
    ref = load_fixture("constants")["outputs"]["canonical"]
    with criterion(2, "canonical constants") as chk:
        t0 = time.perf_counter()
        medium = canonical_constant()
        rep, eq = check_hypotheses(medium, (0.0, 500.0))
        eq = Equilibria(medium, (0.0, 50.0))
        lam = eq.lambda_least()
        h_err = float(np.max(np.abs(eq.h(eq.h.grid) - 0.4)))
        sp = critical_speed(lam)
        dt = time.perf_counter() - t0
        chk["hypotheses"] = (rep.all_pass, rep.verdicts)
        chk["lambda"] = (lam == 0.75, repr(lam))
        chk["h_err"] = (h_err <= 1e-10, fmt(h_err))
        chk["c0_vs_fixture"] = (abs(sp.c0 - ref["c0_scan"]) <= 1e-8, fmt(abs(sp.c0 - ref["c0_scan"])))
        chk["mu_vs_fixture"] = (abs(sp.mu_star - ref["mu_star_scan"]) <= 1e-5,
                                fmt(abs(sp.mu_star - ref["mu_star_scan"])))
        chk["runtime"] = (dt < 1.0, f"{dt:.3f}s")


def test_criterion_03_front_existence_constant(constant_front):
    with criterion(3, "front existence at gamma=2 (constant)") as chk:
        eq, anz, front, dt = constant_front
        # gaps[i] compares taus[i], taus[i+1]; the (100, 200) pair is index 2
        i = front.taus.index(100.0)
        gap = front.gaps[i]
        sw = front.sandwich
        X = profile_positions(front, eq, 0.5)
        meas = least_mean_speed(front.times, X, 20.0, 2.0)
        chk["gap_100_200"] = (gap < 1e-4, fmt(gap))
        chk["uptick"] = (front.max_uptick() <= 1e-9, fmt(front.max_uptick()))
        chk["sandwich"] = (max(sw.values()) <= 10 * ATOL, fmt(max(sw.values())))
        chk["speed"] = (meas.rel_error <= 0.02, f"{meas.estimate:.6f}")
        chk["window"] = (front.stats["n_sites"] >= 2000, front.stats["n_sites"])
        chk["runtime"] = (dt < 300, f"{dt:.1f}s")


def test_criterion_04_periodic_medium(periodic_front):
    with criterion(4, "periodic medium") as chk:
        eq, anz, front, dt = periodic_front
        period = 2 * math.pi
        t = np.linspace(-100.0, 100.0, 2001)
        per_err = max(float(np.max(np.abs(p(t) - p(t + period)))) for p in (eq.u_star, eq.v_star, eq.h))
        grid = np.linspace(-700.0, 150.0, 4001)
        a_per = float(np.max(np.abs(anz.A(grid) - anz.A(grid + period))))
        X = profile_positions(front, eq, 0.5)
        meas = least_mean_speed(front.times, X, 10 * period, 2.0)
        chk["equilibria_periodic"] = (per_err <= 1e-6, fmt(per_err))
        chk["A_periodic"] = (a_per <= 1e-6, fmt(a_per))
        chk["A_bounded"] = (anz.a_norm <= 50.0, fmt(anz.a_norm))
        chk["converged"] = (front.converged, fmt(front.gap))
        chk["speed"] = (meas.rel_error <= 0.03, f"{meas.estimate:.6f}")
        chk["runtime"] = (dt < 600, f"{dt:.1f}s")


def test_criterion_05_threshold(constant_spread, constant_front, periodic_front):
    with criterion(5, "threshold and spreading") as chk:
        eq, rep, dt = constant_spread
        c0 = rep.c0
        chk["spread_slope"] = (rep.rel_error() <= 0.03, f"{rep.estimate:.5f} vs c0 {c0:.5f}")
        chk["window"] = (rep.final.n == 4000 and rep.final.time == 300.0, rep.final.n)
        lowest = math.inf
        for f_eq, _, front, _ in (constant_front, periodic_front):
            X = profile_positions(front, f_eq, 0.5)
            lowest = min(lowest, least_mean_speed(front.times, X, 20.0).estimate)
        chk["front_speeds"] = (lowest >= 0.97 * c0, f"min {lowest:.4f} >= {0.97 * c0:.4f}")
        refused = 0
        anz_eq = constant_front[0]
        for gamma in (c0, c0 - 1e-3, 1.5, 1.0):
            try:
                build_ansatz(anz_eq, gamma)
            except NoSupercriticalRoot:
                refused += 1
        chk["subcritical_refused"] = (refused == 4, f"{refused}/4")
        chk["runtime"] = (dt < 600, f"{dt:.1f}s")


def test_criterion_06_comparison_suite():
    with criterion(6, "comparison principle suite") as chk:
        t0 = time.perf_counter()
        medium = canonical_quasi_periodic()
        eq = Equilibria(medium, (-1.0, 11.0))
        rng = np.random.default_rng(6)
        n, pairs = 200, 100
        us0, vs0 = float(eq.u_star(np.array(0.0))), float(eq.v_star(np.array(0.0)))
        lower, upper, strict = [], [], []
        for k in range(pairs):
            ua = rng.uniform(0, us0, n) * (rng.random(n) < 0.7)
            va = rng.uniform(0, vs0, n) * (rng.random(n) < 0.7)
            s = k % 2 == 0
            bump_u = rng.uniform(0, 0.2, n) * (rng.random(n) < 0.5)
            bump_v = rng.uniform(0, 0.2, n) * (rng.random(n) < 0.5)
            if s:
                bump_u += 1e-3
                bump_v += 1e-3
            ub = np.minimum(ua + bump_u, us0)
            vb = np.minimum(va + bump_v, vs0)
            ua = np.minimum(ua, ub - (1e-3 if s else 0.0)).clip(0)
            va = np.minimum(va, vb - (1e-3 if s else 0.0)).clip(0)
            lower.append(LatticeState(ua, va, 0.0, -100, 0.0, "cooperative"))
            upper.append(LatticeState(ub, vb, 0.0, -100, 0.0, "cooperative"))
            strict.append(s)
        times = np.linspace(0.5, 10.0, 20)
        trs = integrate_many("cooperative", medium, lower + upper, 0.0, 10.0, IntegratorOptions(), times, eq)
        worst, strict_ok = 0.0, True
        for k in range(pairs):
            lo, hi = trs[k], trs[pairs + k]
            for a, b in zip(lo.states, hi.states):
                du, dv = b.u - a.u, b.v - a.v
                worst = max(worst, -float(du.min()), -float(dv.min()))
                if strict[k]:
                    strict_ok &= bool(np.all(du[2:-2] > 0) and np.all(dv[2:-2] > 0))
        dt = time.perf_counter() - t0
        chk["violation"] = (worst <= 10 * ATOL, fmt(max(worst, 0.0)))
        chk["strict_kept"] = (strict_ok, strict_ok)
        chk["runtime"] = (dt < 120, f"{dt:.1f}s")


def test_criterion_07_pullback_monotonicity(constant_front, periodic_front):
    with criterion(7, "pullback monotonicity in tau") as chk:
        for name, (_, _, front, _) in (("constant", constant_front), ("periodic", periodic_front)):
            chk[name] = (front.tau_violation <= 10 * ATOL, fmt(front.tau_violation))
            gaps_finite = all(math.isfinite(g) for g in front.gaps)
            chk[f"{name}_schedule"] = (gaps_finite and len(front.taus) >= 4, front.taus)


def test_criterion_08_shift_and_stationarity():
    with criterion(8, "shift covariance and stationarity") as chk:
        rng = np.random.default_rng(8)
        media = [canonical_quasi_periodic(), canonical_periodic(0.25),
                 Medium({"kind": "smoothed-switching", "seed": 11, "channels": {
                     **{c: {"type": "constant", "value": v} for c, v in zip(CHANNELS, (1, 1, .5, .5, 1, 1))},
                     "a1": {"type": "switching", "low": 0.8, "high": 1.2, "mean_dwell": 5.0, "width": 1.0}}}),
                 Medium({"kind": "bounded-noise", "seed": 5, "channels": {
                     **{c: {"type": "constant", "value": v} for c, v in zip(CHANNELS, (1, 1, .5, .5, 1, 1))},
                     "a1": {"type": "noise", "mean": 1.0, "amplitude": 0.2, "cell": 2.0}}})]
        mismatches = 0
        for k in range(1000):
            m = media[k % len(media)]
            s, t = rng.uniform(-500, 500), rng.uniform(-500, 500)
            mismatches += int(not np.array_equal(m.shift(s).sample_all(np.array([t])),
                                                  m.sample_all(np.array([t + s]))))
        chk["shift_bit_exact"] = (mismatches == 0, f"{mismatches}/1000")
        medium = canonical_quasi_periodic()
        lam = Equilibria(medium, (-100.0, 400.0)).lambda_least()
        builder = FrontBuilder(2.0, lam)
        for t in (3.7, 12.1):
            res = stationarity_check(builder, medium, t)
            chk[f"residual_t{t}"] = (res["residual"] < 5e-4, fmt(res["residual"]))


def test_criterion_09_integrator_fidelity():
    fx = load_fixture("integrator_reference")
    inp, out = fx["inputs"], fx["outputs"]
    with criterion(9, "integrator fidelity") as chk:
        medium = Medium(inp["medium"])
        st = LatticeState(np.array(inp["u0"]), np.array(inp["v0"]), 0.0, 0, 0.0, "competition")
        opts = IntegratorOptions(boundary="fixed", ghosts=tuple(inp["ghosts"]))
        tr = integrate("competition", medium, st, 0.0, 2.0, opts, t_eval=out["t"])
        err = max(max(float(np.max(np.abs(s.u - np.array(u)))), float(np.max(np.abs(s.v - np.array(v)))))
                  for s, u, v in zip(tr.states, out["u"], out["v"]))
        chk["rk4_reference"] = (err <= 1e-7, fmt(err))
        chk["reference_dt"] = (inp["dt"] == 1e-5, inp["dt"])
        # scalar logistic: a long homogeneous chain with zero ghosts; the
        # boundary signal cannot reach the middle site by t = 5 (its size
        # there is below t^100/100!), so that site follows the pure ODE
        lf = load_fixture("logistic")
        u0, t_end = lf["inputs"]["u0"], lf["inputs"]["t"]
        log_m = Medium({"kind": "constant", "seed": 0, "channels": {
            c: {"type": "constant", "value": v} for c, v in zip(CHANNELS, (1, 1, 1, 1, 1, 1))}})
        chain = LatticeState(np.full(201, u0), np.zeros(201), 0.0, -100, 0.0, "competition")
        tr = integrate("competition", log_m, chain, 0.0, t_end, IntegratorOptions(boundary="fixed", ghosts=(0, 0, 0, 0)))
        u_mid = float(tr.states[-1].u[100])
        exact = logistic_closed_form(u0, t_end)
        chk["logistic"] = (abs(u_mid - exact) <= 1e-9 and abs(exact - lf["outputs"]["u"]) <= 1e-15,
                           fmt(abs(u_mid - exact)))


def test_criterion_10_interior_convergence(constant_spread):
    with criterion(10, "interior convergence") as chk:
        eq, rep, _ = constant_spread
        c = 0.5 * rep.c0
        dev = rep.interior_deviation(eq, c)
        chk["t"] = (rep.final.time == 300.0, rep.final.time)
        chk["sup_interior"] = (dev < 1e-2, fmt(dev))
