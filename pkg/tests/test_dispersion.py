import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_fixture
from latticefronts.dispersion import (SpeedPath, critical_speed, decay_rates_for_speed, foc, instantaneous_speed,
                                      mu_tilde_rule, speed_integral, wave_speed_curve)
from latticefronts.env import canonical_constant, canonical_quasi_periodic
from latticefronts.equilibria import Equilibria
from latticefronts.errors import AnsatzError, NoSupercriticalRoot

lambdas = st.floats(1e-3, 20.0)


def test_curve_matches_high_precision_oracle():
    for row in load_fixture("dispersion")["outputs"]["curve"]:
        assert abs(wave_speed_curve(row["lambda"], row["mu"]) - row["value"]) < 1e-14


def test_curve_rejects_nonpositive_mu():
    with pytest.raises(ValueError):
        wave_speed_curve(0.75, 0.0)


def test_roots_match_bisection_oracle():
    ref = load_fixture("dispersion")["outputs"]["roots"]
    pair = decay_rates_for_speed(ref["lambda"], ref["gamma"])
    assert abs(pair.mu_minus - ref["mu_minus"]) < 1e-12
    assert abs(pair.mu_plus - ref["mu_plus"]) < 1e-12


def test_refined_oracle_agrees_with_critical_speed():
    for row in load_fixture("dispersion")["outputs"]["critical"]:
        rep = critical_speed(row["lambda"])
        assert abs(rep.c0 - row["c0_refined"]) < 1e-13
        assert abs(rep.mu_star - row["mu_star_refined"]) < 1e-7


@settings(max_examples=80, deadline=None)
@given(lam=lambdas, mu=st.floats(1e-3, 15.0))
def test_critical_speed_is_the_minimum(lam, mu):
    rep = critical_speed(lam)
    assert rep.foc_residual < 1e-10
    assert abs(foc(lam, rep.mu_star)) < 1e-10
    assert rep.c0 <= wave_speed_curve(lam, mu) * (1 + 1e-14)


@settings(max_examples=80, deadline=None)
@given(lam=lambdas, excess=st.floats(1e-4, 10.0))
def test_roots_bracket_the_minimizer(lam, excess):
    rep = critical_speed(lam)
    gamma = rep.c0 * (1 + excess)
    pair = decay_rates_for_speed(lam, gamma)
    assert pair.mu_minus < rep.mu_star < pair.mu_plus
    for mu in (pair.mu_minus, pair.mu_plus):
        assert abs(wave_speed_curve(lam, mu) - gamma) < 1e-9 * gamma
    mt = mu_tilde_rule(pair.mu_minus, pair.mu_star)
    assert pair.mu_minus < mt < min(2 * pair.mu_minus, pair.mu_star)


@settings(max_examples=40, deadline=None)
@given(lam=lambdas, frac=st.floats(0.0, 1.0))
def test_subcritical_speeds_refused(lam, frac):
    c0 = critical_speed(lam).c0
    with pytest.raises(NoSupercriticalRoot, match="no supercritical root"):
        decay_rates_for_speed(lam, c0 * frac)


def test_nonpositive_lambda_refused():
    with pytest.raises(AnsatzError):
        critical_speed(0.0)
    with pytest.raises(AnsatzError):
        critical_speed(-1.0)


def test_speed_grows_with_lambda():
    c = [critical_speed(lam).c0 for lam in (0.1, 0.5, 1.0, 2.0, 5.0)]
    assert all(b > a for a, b in zip(c, c[1:]))


def test_speed_path_constant_medium():
    eq = Equilibria(canonical_constant(), (-10.0, 10.0))
    pair = decay_rates_for_speed(0.75, 2.0)
    S = SpeedPath(eq, pair.mu_minus)
    t = np.array([-5.0, 0.0, 3.0, 7.5])
    assert np.max(np.abs(S(t) - 2.0 * t)) < 1e-12
    assert np.max(np.abs(S.speed(t) - 2.0)) < 1e-12


def test_speed_path_matches_direct_integral():
    m = canonical_quasi_periodic()
    eq = Equilibria(m, (-5.0, 30.0))
    mu = 0.6
    S = SpeedPath(eq, mu)
    direct = speed_integral(m, eq.v_star, mu, 0.0, 25.0, tol=1e-11)
    assert abs(float(S(np.array(25.0))) - direct) < 1e-9
    t = np.linspace(1.0, 20.0, 7)
    eps = 1e-5
    fd = (S(t + eps) - S(t - eps)) / (2 * eps)
    assert np.max(np.abs(fd - instantaneous_speed(m, eq.v_star, mu, t))) < 1e-6
