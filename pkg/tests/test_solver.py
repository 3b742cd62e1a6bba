import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latticefronts.env import canonical_constant, canonical_quasi_periodic
from latticefronts.equilibria import Equilibria
from latticefronts.errors import NumericalAbort
from latticefronts.solver import (IntegratorOptions, LatticeState, assemble_profile, competition_rhs,
                                  cooperative_rhs, discrete_laplacian, from_cooperative, integrate,
                                  integrate_many, integrate_offset_family, order_leq, to_cooperative)

unit = st.floats(0.0, 1.0)


def test_laplacian_identities():
    x = np.arange(-5.0, 6.0)
    assert np.all(discrete_laplacian(np.full(11, 3.0), 3.0, 3.0) == 0.0)
    assert np.all(discrete_laplacian(2 * x + 1, -11.0, 13.0) == 0.0)
    assert np.allclose(discrete_laplacian(x**2, 36.0, 36.0), 2.0)
    assert discrete_laplacian(x**2).shape == (9,)


def test_rhs_vanishes_at_the_equilibria():
    m = canonical_constant()
    n = 8
    # invaded state (1, 0) in competition variables
    s = LatticeState(np.ones(n), np.zeros(n), frame="competition")
    du, dv = competition_rhs(0.0, s, m, ghosts=(1.0, 0.0, 1.0, 0.0))
    assert np.max(np.abs(du)) == 0 and np.max(np.abs(dv)) == 0
    # uninvaded (0, v*) is the cooperative origin
    s = LatticeState(np.zeros(n), np.zeros(n))
    du, dv = cooperative_rhs(0.0, s, m, 0.5)
    assert np.max(np.abs(du)) == 0 and np.max(np.abs(dv)) == 0
    # invaded (1, 0) is (1, v*) cooperatively
    s = LatticeState(np.ones(n), np.full(n, 0.5))
    du, dv = cooperative_rhs(0.0, s, m, 0.5, ghosts=(1.0, 0.5, 1.0, 0.5))
    assert np.max(np.abs(du)) < 1e-15 and np.max(np.abs(dv)) < 1e-15


@settings(max_examples=60, deadline=None)
@given(u=arrays(float, 12, elements=unit), v=arrays(float, 12, elements=unit), t=st.floats(0.0, 50.0),
       ghosts=st.tuples(unit, unit, unit, unit))
def test_cooperative_field_is_the_pushforward(u, v, t, ghosts):
    """Changing variables and then differentiating agrees with the chain rule."""
    m = canonical_quasi_periodic()
    eq = _qp_equilibria()
    vs = float(eq.v_star(np.array([t]))[0])
    a2, c2 = m.sample("a2", np.array([t]))[0], m.sample("c2", np.array([t]))[0]
    vs_dot = vs * (a2 - c2 * vs)
    v = v * vs
    comp = LatticeState(u, v, time=t, frame="competition")
    gl = (ghosts[0], ghosts[1] * vs, ghosts[2], ghosts[3] * vs)
    du, dv = competition_rhs(t, comp, m, gl)
    coop = to_cooperative(comp, eq.v_star)
    cg = (gl[0], vs - gl[1], gl[2], vs - gl[3])
    dcu, dcv = cooperative_rhs(t, coop, m, eq.v_star, cg)
    assert np.max(np.abs(dcu - du)) < 1e-13
    assert np.max(np.abs(dcv - (vs_dot - dv))) < 1e-12


_QP = {}


def _qp_equilibria():
    if "eq" not in _QP:
        _QP["eq"] = Equilibria(canonical_quasi_periodic(), (-1.0, 51.0))
    return _QP["eq"]


@settings(max_examples=40, deadline=None)
@given(u=arrays(float, 7, elements=unit), v=arrays(float, 7, elements=unit), vs=st.floats(0.1, 3.0))
def test_frame_round_trip(u, v, vs):
    s = LatticeState(u, v * vs, time=1.5, first=-3, offset=0.25, frame="competition")
    back = from_cooperative(to_cooperative(s, vs), vs)
    assert np.array_equal(back.u, s.u)
    assert np.max(np.abs(back.v - s.v)) <= 4e-16 * vs
    assert (back.first, back.offset, back.frame) == (-3, 0.25, "competition")
    with pytest.raises(ValueError):
        from_cooperative(s, vs)


def test_state_validation():
    with pytest.raises(ValueError):
        LatticeState(np.zeros(3), np.zeros(4))
    with pytest.raises(ValueError):
        LatticeState(np.zeros(3), np.zeros(3), frame="mixed")
    with pytest.raises(ValueError):
        IntegratorOptions(boundary="periodic")
    s = LatticeState(np.zeros(4), np.zeros(4), first=10, offset=0.5)
    assert np.array_equal(s.x, [10.5, 11.5, 12.5, 13.5])


def test_order_leq():
    a = LatticeState(np.array([0.0, 0.5, 1.0]), np.array([0.1, 0.2, 0.3]))
    b = LatticeState(np.array([0.0, 0.6, 0.9]), np.array([0.1, 0.2, 0.3]))
    ok, viol = order_leq(a, b)
    assert not ok and abs(viol - 0.1) < 1e-15
    ok, viol = order_leq(a, b, collar=1)
    assert ok and viol == 0.0
    with pytest.raises(ValueError):
        order_leq(a, LatticeState(np.zeros(3), np.zeros(3), first=1))


def test_large_negative_state_aborts():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 5.0))
    s = LatticeState(np.full(10, -1e-3), np.zeros(10))
    with pytest.raises(NumericalAbort, match="negative"):
        integrate("cooperative", m, s, 0.0, 1.0, IntegratorOptions(boundary="trivial"), equilibria=eq)


def test_tiny_violations_are_clipped():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 5.0))
    s = LatticeState(np.full(10, -1e-12), np.zeros(10))
    tr = integrate("cooperative", m, s, 0.0, 0.5, IntegratorOptions(boundary="trivial"), equilibria=eq)
    assert tr.stats["clipped"] >= 1
    assert np.all(tr.states[-1].u >= 0)


def test_homogeneous_logistic_matches_closed_form():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 12.0))
    s = LatticeState(np.full(5, 0.1), np.full(5, 0.5))
    # ghosts follow the same homogeneous solution; with v = v* this is the
    # scalar logistic in u with the competitor removed
    t_eval = [2.0, 5.0, 10.0]
    exact = [0.1 * np.exp(t) / (1 - 0.1 + 0.1 * np.exp(t)) for t in t_eval]
    opts = IntegratorOptions(rtol=1e-11, atol=1e-13, boundary="ansatz",
                             ghosts=lambda ts, xl, xr: _logistic_ghosts(ts, len(xl)))
    tr = integrate("cooperative", m, s, 0.0, 10.0, opts, t_eval=t_eval, equilibria=eq)
    for st_, ref in zip(tr.states, exact):
        assert np.max(np.abs(st_.u - ref)) < 1e-9
        assert np.max(np.abs(st_.v - 0.5)) < 1e-12


def _logistic_ghosts(ts, rows):
    ts = np.asarray(ts)
    u = 0.1 * np.exp(ts) / (1 - 0.1 + 0.1 * np.exp(ts))
    G = np.empty((len(ts), 4, rows))
    G[:, 0, :] = u[:, None]
    G[:, 2, :] = u[:, None]
    G[:, 1, :] = 0.5
    G[:, 3, :] = 0.5
    return G


def test_batched_rows_match_separate_runs():
    """Rows stepped together agree with rows stepped alone to within tolerance."""
    m = canonical_quasi_periodic()
    eq = Equilibria(m, (-1.0, 12.0))
    x = np.arange(60.0)
    rows = [LatticeState(np.where(x + k / 3 < 20, 1.0, 0.0), np.where(x + k / 3 < 20, 0.4, 0.0),
                         offset=k / 3) for k in range(3)]
    opts = IntegratorOptions(rtol=1e-10, atol=1e-12)
    together = integrate_many("cooperative", m, rows, 0.0, 10.0, opts, equilibria=eq)
    for row, tr in zip(rows, together):
        alone = integrate("cooperative", m, row, 0.0, 10.0, opts, equilibria=eq)
        assert np.max(np.abs(alone.states[-1].u - tr.states[-1].u)) < 1e-8
        assert np.max(np.abs(alone.states[-1].v - tr.states[-1].v)) < 1e-8


def test_offset_family_interleaves_sorted():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 5.0))
    step = lambda x: (np.where(x < 10, 1.0, 0.0), np.where(x < 10, 0.5, 0.0))
    fam = integrate_offset_family("cooperative", m, step, 4, 0, 30, 0.0, 3.0, t_eval=[0.0, 3.0], equilibria=eq)
    x, u, v = assemble_profile(fam, 0)
    assert np.allclose(np.diff(x), 0.25)
    assert np.array_equal(u, np.where(x < 10, 1.0, 0.0))
    x, u, v = assemble_profile(fam, 1)
    # monotone initial data stay monotone under the order-preserving flow
    assert np.all(np.diff(u) <= 1e-12) and np.all(np.diff(v) <= 1e-12)
    with pytest.raises(ValueError):
        integrate_offset_family("cooperative", m, step, 0, 0, 30, 0.0, 1.0, equilibria=eq)


def test_tracking_window_follows_the_front():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 40.0))
    x = np.arange(80.0)
    s = LatticeState(np.where(x < 20, 1.0, 0.0), np.where(x < 20, 0.5, 0.0))
    opts = IntegratorOptions(track=True, margin=20, atol=1e-9)
    tr = integrate("cooperative", m, s, 0.0, 30.0, opts, equilibria=eq)
    st_ = tr.states[-1]
    assert tr.stats["shifts"] + tr.stats["grows"] > 0
    # front has moved roughly 2 * 30 sites to the right and the window kept up
    front = st_.x[np.flatnonzero(st_.u > 0.5)[-1]]
    assert 60 < front < 100
    assert st_.x[-1] - front >= 20


def test_output_times_validated():
    m = canonical_constant()
    eq = Equilibria(m, (-1.0, 5.0))
    s = LatticeState(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        integrate("cooperative", m, s, 0.0, 1.0, t_eval=[2.0], equilibria=eq)
    with pytest.raises(ValueError):
        integrate("competition", m, s, 0.0, 1.0, equilibria=eq)
    tr = integrate("cooperative", m, s, 1.0, 1.0, equilibria=eq)
    assert len(tr) == 2 and tr.at(1.0).n == 4
