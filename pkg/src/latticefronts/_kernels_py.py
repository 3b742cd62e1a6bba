"""numpy versions of the hot loops.

Array conventions match the compiled module: states are (rows, sites)
arrays, ``p`` holds (a1, b1, c1, a2, b2, c2, vstar) for one stage time and
``g`` holds the ghost values (uL, vL, uR, vR) per row.
"""
import numpy as np

from ._tableau import A, E

COMPETITION = 0
COOPERATIVE = 1


def _lap(U, left, right):
    out = np.empty_like(U)
    out[:, 1:-1] = U[:, 2:] - 2.0 * U[:, 1:-1] + U[:, :-2]
    if U.shape[1] > 1:
        out[:, 0] = U[:, 1] - 2.0 * U[:, 0] + left
        out[:, -1] = right - 2.0 * U[:, -1] + U[:, -2]
    else:
        out[:, 0] = right - 2.0 * U[:, 0] + left
    return out


def rhs(frame, U, V, p, g, dU, dV):
    a1, b1, c1, a2, b2, c2, vs = p
    dU[...] = _lap(U, g[0], g[2])
    dV[...] = _lap(V, g[1], g[3])
    if frame == COMPETITION:
        dU += U * (a1 - b1 * U - c1 * V)
        dV += V * (a2 - b2 * U - c2 * V)
    else:
        dU += U * (a1 - b1 * U - c1 * (vs - V))
        dV += b2 * (vs - V) * U + V * (a2 - 2.0 * c2 * vs + c2 * V)


def dp5_step(frame, U, V, h, P, G, KU, KV, YU, YV, Unew, Vnew, rtol, atol):
    """One Dormand-Prince step. KU[0], KV[0] must hold f(t, y) on entry.

    Fills the remaining stages (KU[6] is f at the new point) and writes the
    fifth-order solution into Unew, Vnew. Returns the scaled max-norm error.
    """
    for s in range(1, 7):
        YU[...] = U
        YV[...] = V
        for j in range(s):
            if A[s, j] != 0.0:
                YU += (h * A[s, j]) * KU[j]
                YV += (h * A[s, j]) * KV[j]
        if s == 6:
            Unew[...] = YU
            Vnew[...] = YV
        rhs(frame, YU, YV, P[s], G[s], KU[s], KV[s])
    eu = h * np.tensordot(E, KU, axes=1)
    ev = h * np.tensordot(E, KV, axes=1)
    su = atol + rtol * np.maximum(np.abs(U), np.abs(Unew))
    sv = atol + rtol * np.maximum(np.abs(V), np.abs(Vnew))
    return float(max(np.max(np.abs(eu) / su), np.max(np.abs(ev) / sv)))


def window_extrema(prefix, lo, hi):
    """Extremes of (prefix[i+l] - prefix[i]) / l over i, for each l in [lo, hi]."""
    prefix = np.asarray(prefix, dtype=float)
    k = hi - lo + 1
    mins = np.empty(k)
    maxs = np.empty(k)
    imin = np.empty(k, dtype=np.int64)
    imax = np.empty(k, dtype=np.int64)
    for j, length in enumerate(range(lo, hi + 1)):
        avg = (prefix[length:] - prefix[:-length]) / length
        imin[j] = np.argmin(avg)
        imax[j] = np.argmax(avg)
        mins[j] = avg[imin[j]]
        maxs[j] = avg[imax[j]]
    return mins, imin, maxs, imax


def linear_recurrence(E_, F, w0):
    """w[j+1] = E[j] w[j] + F[j] with w[0] = w0."""
    w = np.empty(len(E_) + 1)
    w[0] = w0
    acc = float(w0)
    for j in range(len(E_)):
        acc = E_[j] * acc + F[j]
        w[j + 1] = acc
    return w
