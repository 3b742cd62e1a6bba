"""Method-of-lines integration of the competition lattice and its cooperative form.

Competition frame::

    u_i' = (H u)_i + u_i (a1 - b1 u_i - c1 v_i)
    v_i' = (H v)_i + v_i (a2 - b2 u_i - c2 v_i)

Cooperative frame (v replaced by v* - v)::

    u_i' = (H u)_i + u_i (a1 - b1 u_i - c1 (v* - v_i))
    v_i' = (H v)_i + b2 (v* - v_i) u_i + v_i (a2 - 2 c2 v* + c2 v_i)

with (H u)_i = u_{i+1} - 2 u_i + u_{i-1}. A finite window of sites is
closed by ghost values at both ends.

Several lattices with the same window can be advanced together
(:func:`integrate_many`). They then share one step-size sequence, so two
ordered states are pushed through the *same* discrete map, which is
order preserving for the cooperative system when the step is small. This
is what makes ordering checks meaningful at the atol level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from ._tableau import C as NODES, dense_weights
from .errors import NumericalAbort

FRAMES = ("competition", "cooperative")


@dataclass
class LatticeState:
    """(u, v) on sites first, first+1, ... shifted by a sublattice phase."""

    u: np.ndarray
    v: np.ndarray
    time: float = 0.0
    first: int = 0
    offset: float = 0.0
    frame: str = "cooperative"

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-d arrays of equal length")
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}")

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def index(self) -> np.ndarray:
        return self.first + np.arange(self.n)

    @property
    def x(self) -> np.ndarray:
        return self.index + self.offset

    def copy(self) -> "LatticeState":
        return replace(self, u=self.u.copy(), v=self.v.copy())


@dataclass
class IntegratorOptions:
    """Tolerances and boundary handling.

    boundary:
      ``"equilibrium"`` left ghost at the invaded state, right ghost at the
      uninvaded state; ``"trivial"`` uninvaded state on both sides;
      ``"fixed"`` constant ghosts ``ghosts = (uL, vL, uR, vR)``;
      ``"ansatz"`` ghosts from ``ghosts(times, x_left, x_right)`` returning
      an array of shape (len(times), 4, rows).
    """

    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: Optional[float] = None
    first_step: Optional[float] = None
    boundary: str = "equilibrium"
    ghosts: object = None
    dense_output: bool = True
    tol_state: float = 1e-8
    track: bool = False
    margin: int = 30
    drop_tol: float = 1e-9
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.boundary not in ("equilibrium", "trivial", "fixed", "ansatz"):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def at(self, t: float) -> LatticeState:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.states[j]


# --------------------------------------------------------------------------
# single evaluations (used by tests and as readable references)


def discrete_laplacian(values, left: float = None, right: float = None) -> np.ndarray:
    """u_{i+1} - 2 u_i + u_{i-1}; ends use the given ghosts (or are dropped if None)."""
    u = np.asarray(values, dtype=float)
    if left is None or right is None:
        return u[2:] - 2.0 * u[1:-1] + u[:-2]
    padded = np.concatenate([[left], u, [right]])
    return padded[2:] - 2.0 * padded[1:-1] + padded[:-2]


def _frame_code(frame: str) -> int:
    return kernels.COMPETITION if frame == "competition" else kernels.COOPERATIVE


def evaluate_rhs(system: str, medium, state: LatticeState, t: float, ghosts, v_star: float = 0.0):
    """Right-hand side at one time with explicit ghosts (uL, vL, uR, vR)."""
    p = np.array([*medium.coeffs_at(t), v_star], dtype=float)
    g = np.asarray(ghosts, dtype=float).reshape(4, 1)
    U = state.u[None, :].copy()
    V = state.v[None, :].copy()
    dU = np.empty_like(U)
    dV = np.empty_like(V)
    kernels.rhs(_frame_code(system), U, V, p, np.ascontiguousarray(g), dU, dV)
    return dU[0], dV[0]


def competition_rhs(t: float, state: LatticeState, medium, ghosts=(0.0, 0.0, 0.0, 0.0)):
    return evaluate_rhs("competition", medium, state, t, ghosts)


def cooperative_rhs(t: float, state: LatticeState, medium, v_star, ghosts=(0.0, 0.0, 0.0, 0.0)):
    vs = float(v_star(np.array([t]))[0]) if callable(v_star) else float(v_star)
    return evaluate_rhs("cooperative", medium, state, t, ghosts, vs)


def to_cooperative(state: LatticeState, v_star) -> LatticeState:
    if state.frame != "competition":
        raise ValueError("state already in the cooperative frame")
    vs = float(v_star(np.array([state.time]))[0]) if callable(v_star) else float(v_star)
    return replace(state, u=state.u.copy(), v=vs - state.v, frame="cooperative")


def from_cooperative(state: LatticeState, v_star) -> LatticeState:
    if state.frame != "cooperative":
        raise ValueError("state not in the cooperative frame")
    vs = float(v_star(np.array([state.time]))[0]) if callable(v_star) else float(v_star)
    return replace(state, u=state.u.copy(), v=vs - state.v, frame="competition")


def order_leq(a: LatticeState, b: LatticeState, collar: int = 0):
    """Componentwise a <= b. Returns (holds, max violation)."""
    if a.first != b.first or a.n != b.n or a.offset != b.offset:
        raise ValueError("states live on different windows")
    sl = slice(collar, a.n - collar if collar else None)
    viol = max(float(np.max(a.u[sl] - b.u[sl], initial=0.0)),
               float(np.max(a.v[sl] - b.v[sl], initial=0.0)), 0.0)
    return viol == 0.0, viol


# --------------------------------------------------------------------------
# the integrator


class _Problem:
    """Stage parameters and ghost values for a batch of rows."""

    def __init__(self, system, medium, equilibria, opts, offsets):
        self.frame = _frame_code(system)
        self.system = system
        self.medium = medium
        self.eq = equilibria
        self.opts = opts
        self.offsets = np.asarray(offsets, dtype=float)
        need_eq = system == "cooperative" or opts.boundary in ("equilibrium", "trivial")
        if need_eq and equilibria is None:
            raise ValueError("equilibria required for this system/boundary policy")

    def vstar(self, times):
        if self.eq is None:
            return np.zeros_like(times)
        return self.eq.v_star(times)

    def params(self, times):
        P = np.empty((len(times), 7))
        P[:, :6] = self.medium.sample_all(times).T
        P[:, 6] = self.vstar(times)
        return P

    def ghosts(self, times, first, n):
        B = len(self.offsets)
        G = np.zeros((len(times), 4, B))
        pol = self.opts.boundary
        coop = self.system == "cooperative"
        if pol == "equilibrium":
            us = self.eq.u_star(times)
            vs = self.eq.v_star(times)
            G[:, 0, :] = us[:, None]
            if coop:
                G[:, 1, :] = vs[:, None]
            else:
                G[:, 3, :] = vs[:, None]
        elif pol == "trivial":
            if not coop:
                vs = self.eq.v_star(times)
                G[:, 1, :] = vs[:, None]
                G[:, 3, :] = vs[:, None]
        elif pol == "fixed":
            G[:, :, :] = np.asarray(self.opts.ghosts, dtype=float)[None, :, None]
        else:
            xl = first - 1 + self.offsets
            xr = first + n + self.offsets
            G[:, :, :] = self.opts.ghosts(np.asarray(times), xl, xr)
        return G

    def upper_v(self, t):
        if self.eq is None:
            return None
        return float(self.eq.v_star(np.array([t]))[0])


def _default_max_step(medium) -> float:
    rough = medium.roughness()
    if rough > 0:
        return 0.01 / (1.0 + rough)
    # keeps the explicit step inside the order-preserving range of the
    # cooperative system (diagonal rates are about -3)
    return 0.25


def _enforce(U, V, vmax, tol, frame, where):
    """Clip tiny invariant violations; abort on larger ones. Returns True if clipped."""
    changed = False
    umin = U.min()
    if umin < 0.0:
        if umin < -tol:
            raise NumericalAbort(f"u went negative ({umin:.3g}) at t={where:.6g}")
        np.maximum(U, 0.0, out=U)
        changed = True
    vmin = V.min()
    if vmin < 0.0:
        if vmin < -tol:
            raise NumericalAbort(f"v went negative ({vmin:.3g}) at t={where:.6g}")
        np.maximum(V, 0.0, out=V)
        changed = True
    if vmax is not None:
        vtop = V.max()
        if vtop > vmax:
            if vtop > vmax + tol:
                raise NumericalAbort(f"v exceeded v* by {vtop - vmax:.3g} at t={where:.6g}")
            np.minimum(V, vmax, out=V)
            changed = True
    return changed


def integrate_many(system: str, medium, states: Sequence[LatticeState], t0: float, t1: float,
                   opts: Optional[IntegratorOptions] = None, t_eval=None, equilibria=None,
                   callback: Optional[Callable] = None) -> list:
    """Advance several lattices on one window with a shared step sequence.

    Parameters
    ----------
    system : "competition" or "cooperative"
    states : lattices with identical ``first`` and length (phases may differ)
    t_eval : output times in [t0, t1]; defaults to [t0, t1]
    equilibria : object with ``u_star`` and ``v_star`` paths
    callback : called as ``callback(t, U, V, first)`` after every accepted step

    Returns
    -------
    list of Trajectory, one per input state.
    """
    opts = opts or IntegratorOptions()
    if system not in FRAMES:
        raise ValueError(f"system must be one of {FRAMES}")
    if not states:
        return []
    first = states[0].first
    n = states[0].n
    for s in states:
        if s.first != first or s.n != n:
            raise ValueError("all states must share the window")
        if s.frame != system:
            raise ValueError(f"state frame {s.frame!r} does not match system {system!r}")
    if t1 < t0:
        raise ValueError("t1 < t0")
    t_eval = np.array([t0, t1] if t_eval is None else sorted(set(float(x) for x in t_eval)))
    if t_eval.size and (t_eval[0] < t0 - 1e-12 or t_eval[-1] > t1 + 1e-12):
        raise ValueError("output times outside [t0, t1]")

    prob = _Problem(system, medium, equilibria, opts, [s.offset for s in states])
    coop = system == "cooperative"
    B = len(states)
    U = np.ascontiguousarray(np.stack([s.u for s in states]))
    V = np.ascontiguousarray(np.stack([s.v for s in states]))
    hmax = opts.max_step if opts.max_step is not None else _default_max_step(medium)
    frame = prob.frame

    def alloc(n_):
        return (np.zeros((7, B, n_)), np.zeros((7, B, n_)), np.empty((B, n_)), np.empty((B, n_)),
                np.empty((B, n_)), np.empty((B, n_)))

    KU, KV, YU, YV, UN, VN = alloc(n)

    def first_stage(t):
        p = prob.params(np.array([t]))[0]
        g = prob.ghosts(np.array([t]), first, U.shape[1])[0]
        kernels.rhs(frame, U, V, np.ascontiguousarray(p), np.ascontiguousarray(g), KU[0], KV[0])

    snaps = [[] for _ in range(B)]
    out_times = []
    firsts = []

    def record(t_out, Uo, Vo):
        out_times.append(t_out)
        firsts.append(first)
        for b in range(B):
            snaps[b].append(LatticeState(Uo[b].copy(), Vo[b].copy(), float(t_out), first,
                                         states[b].offset, system))

    t = float(t0)
    k_out = 0
    while k_out < len(t_eval) and t_eval[k_out] <= t + 1e-12:
        record(t_eval[k_out], U, V)
        k_out += 1

    stats = {"accepted": 0, "rejected": 0, "shifts": 0, "grows": 0, "clipped": 0,
             "max_step": hmax, "backend": kernels.BACKEND}
    if t1 == t0:
        return _pack(snaps, out_times, stats)

    first_stage(t)
    h = opts.first_step or min(hmax, 1e-3)
    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    safety = 0.9
    err_old = 1e-4
    rtol, atol = opts.rtol, opts.atol
    while t < t1:
        if stats["accepted"] + stats["rejected"] > opts.max_steps:
            raise NumericalAbort("step budget exhausted")
        h = min(h, hmax)
        if not opts.dense_output and k_out < len(t_eval):
            h = min(h, t_eval[k_out] - t)
        if t + 1.01 * h >= t1:
            h = t1 - t
        if h <= 1e-14 * max(1.0, abs(t)):
            raise NumericalAbort(f"step size underflow at t={t:.9g} (h={h:.3g})")
        times = t + NODES * h
        P = np.ascontiguousarray(prob.params(times))
        G = np.ascontiguousarray(prob.ghosts(times, first, U.shape[1]))
        err = kernels.dp5_step(frame, U, V, h, P, G, KU, KV, YU, YV, UN, VN, rtol, atol)
        if not math.isfinite(err):
            err = 1e10
        if err <= 1.0:
            t_new = t1 if h == t1 - t else t + h
            # outputs inside (t, t_new]
            while k_out < len(t_eval) and t_eval[k_out] <= t_new + 1e-12:
                te = t_eval[k_out]
                if abs(te - t_new) <= 1e-12:
                    Uo, Vo = UN, VN
                else:
                    w = dense_weights((te - t) / h)
                    Uo = U + h * np.tensordot(w, KU, axes=1)
                    Vo = V + h * np.tensordot(w, KV, axes=1)
                Uo, Vo = Uo.copy(), Vo.copy()
                vmax = prob.upper_v(te)
                _enforce(Uo, Vo, vmax, opts.tol_state, frame, te)
                record(te, Uo, Vo)
                k_out += 1
            U, UN = UN, U
            V, VN = VN, V
            t = t_new
            stats["accepted"] += 1
            clipped = _enforce(U, V, prob.upper_v(t), opts.tol_state, frame, t)
            KU[0] = KU[6]
            KV[0] = KV[6]
            if clipped:
                stats["clipped"] += 1
                first_stage(t)
            if callback is not None:
                callback(t, U, V, first)
            if opts.track and t < t1:
                moved, U, V, first = _track(U, V, first, t, prob, opts, coop, stats)
                if moved:
                    KU, KV, YU, YV, UN, VN = alloc(U.shape[1])
                    first_stage(t)
            fac = (err ** alpha) * (err_old ** -beta) if err > 0 else 0.1
            fac = min(10.0, max(0.2, safety / fac)) if fac > 0 else 10.0
            h = h * fac
            err_old = max(err, 1e-4)
        else:
            stats["rejected"] += 1
            h = h * max(0.2, safety * err ** -alpha)
    stats["final_first"] = first
    stats["final_n"] = int(U.shape[1])
    return _pack(snaps, out_times, stats)


def _pack(snaps, out_times, stats):
    times = np.array(out_times)
    return [Trajectory(times, s, dict(stats)) for s in snaps]


def _track(U, V, first, t, prob, opts, coop, stats):
    """Move or extend the window so the front keeps ``margin`` free sites on the right."""
    n = U.shape[1]
    active = (U > opts.atol) | ((V > opts.atol) if coop else np.zeros_like(U, dtype=bool))
    cols = np.flatnonzero(active.any(axis=0))
    last = cols[-1] if cols.size else 0
    if n - 1 - last >= opts.margin:
        return False, U, V, first
    k = max(opts.margin, n // 8)
    G = prob.ghosts(np.array([t]), first, n)[0]
    newU = np.repeat(G[2][:, None], k, axis=1)
    newV = np.repeat(G[3][:, None], k, axis=1)
    dev = max(np.max(np.abs(U[:, :k] - G[0][:, None])), np.max(np.abs(V[:, :k] - G[1][:, None])))
    if dev <= opts.drop_tol:
        U = np.ascontiguousarray(np.concatenate([U[:, k:], newU], axis=1))
        V = np.ascontiguousarray(np.concatenate([V[:, k:], newV], axis=1))
        first += k
        stats["shifts"] += 1
    else:
        U = np.ascontiguousarray(np.concatenate([U, newU], axis=1))
        V = np.ascontiguousarray(np.concatenate([V, newV], axis=1))
        stats["grows"] += 1
    return True, U, V, first


def integrate(system: str, medium, state0: LatticeState, t0: float, t1: float,
              opts: Optional[IntegratorOptions] = None, t_eval=None, equilibria=None) -> Trajectory:
    """Integrate one lattice; see :func:`integrate_many`."""
    return integrate_many(system, medium, [state0], t0, t1, opts, t_eval, equilibria)[0]


def integrate_offset_family(system: str, medium, sampler: Callable, m: int, first: int, n: int,
                            t0: float, t1: float, opts: Optional[IntegratorOptions] = None,
                            t_eval=None, equilibria=None, phase: float = 0.0) -> list:
    """Solve the m decoupled lattices x = i + phase + k/m, k = 0..m-1.

    ``sampler(x)`` returns the initial (u, v) arrays at real positions x.
    The operator only couples x to x +- 1, so the sublattices are exactly
    independent; they are stepped together for a common step sequence.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    states = []
    for k in range(m):
        off = phase + k / m
        x = first + np.arange(n) + off
        u, v = sampler(x)
        states.append(LatticeState(np.array(u, dtype=float), np.array(v, dtype=float), t0, first, off, system))
    return integrate_many(system, medium, states, t0, t1, opts, t_eval, equilibria)


def assemble_profile(family: Sequence[Trajectory], j: int):
    """Interleave the j-th snapshots of a phase family into one sorted profile (x, u, v)."""
    snaps = [tr.states[j] for tr in family]
    lo = max(s.first for s in snaps)
    hi = min(s.first + s.n for s in snaps)
    if hi <= lo:
        raise ValueError("phase windows do not overlap")
    m = len(snaps)
    cols = hi - lo
    x = np.empty((cols, m))
    u = np.empty((cols, m))
    v = np.empty((cols, m))
    order = np.argsort([s.offset for s in snaps])
    for c, k in enumerate(order):
        s = snaps[k]
        sl = slice(lo - s.first, hi - s.first)
        x[:, c] = s.x[sl]
        u[:, c] = s.u[sl]
        v[:, c] = s.v[sl]
    return x.ravel(), u.ravel(), v.ravel()
