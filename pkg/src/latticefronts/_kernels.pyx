# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops (same contracts as _kernels_py)."""
import numpy as np

from libc.math cimport fabs

from ._tableau import A as _A, E as _E

cdef double TA[7][6]
cdef double TE[7]

for _s in range(7):
    for _j in range(6):
        TA[_s][_j] = _A[_s, _j]
    TE[_s] = _E[_s]


cdef void _rhs(int frame, double[:, ::1] U, double[:, ::1] V, double[::1] p,
               double[:, ::1] g, double[:, ::1] dU, double[:, ::1] dV) noexcept nogil:
    cdef Py_ssize_t B = U.shape[0], n = U.shape[1], b, i
    cdef double a1 = p[0], b1 = p[1], c1 = p[2], a2 = p[3], b2 = p[4], c2 = p[5], vs = p[6]
    cdef double ul, ur, vl, vr, u, v
    for b in range(B):
        for i in range(n):
            u = U[b, i]
            v = V[b, i]
            if i > 0:
                ul = U[b, i - 1]
                vl = V[b, i - 1]
            else:
                ul = g[0, b]
                vl = g[1, b]
            if i < n - 1:
                ur = U[b, i + 1]
                vr = V[b, i + 1]
            else:
                ur = g[2, b]
                vr = g[3, b]
            if frame == 0:
                dU[b, i] = (ur - 2.0 * u + ul) + u * (a1 - b1 * u - c1 * v)
                dV[b, i] = (vr - 2.0 * v + vl) + v * (a2 - b2 * u - c2 * v)
            else:
                dU[b, i] = (ur - 2.0 * u + ul) + u * (a1 - b1 * u - c1 * (vs - v))
                dV[b, i] = (vr - 2.0 * v + vl) + b2 * (vs - v) * u + v * (a2 - 2.0 * c2 * vs + c2 * v)


def rhs(int frame, double[:, ::1] U, double[:, ::1] V, double[::1] p,
        double[:, ::1] g, double[:, ::1] dU, double[:, ::1] dV):
    with nogil:
        _rhs(frame, U, V, p, g, dU, dV)


def dp5_step(int frame, double[:, ::1] U, double[:, ::1] V, double h,
             double[:, ::1] P, double[:, :, ::1] G,
             double[:, :, ::1] KU, double[:, :, ::1] KV,
             double[:, ::1] YU, double[:, ::1] YV,
             double[:, ::1] Unew, double[:, ::1] Vnew,
             double rtol, double atol):
    cdef Py_ssize_t B = U.shape[0], n = U.shape[1], b, i, s, j
    cdef double accu, accv, eu, ev, su, sv, err = 0.0, r
    with nogil:
        for s in range(1, 7):
            for b in range(B):
                for i in range(n):
                    accu = 0.0
                    accv = 0.0
                    for j in range(s):
                        accu = accu + TA[s][j] * KU[j, b, i]
                        accv = accv + TA[s][j] * KV[j, b, i]
                    YU[b, i] = U[b, i] + h * accu
                    YV[b, i] = V[b, i] + h * accv
            if s == 6:
                for b in range(B):
                    for i in range(n):
                        Unew[b, i] = YU[b, i]
                        Vnew[b, i] = YV[b, i]
            _rhs(frame, YU, YV, P[s], G[s], KU[s], KV[s])
        for b in range(B):
            for i in range(n):
                eu = 0.0
                ev = 0.0
                for j in range(7):
                    eu = eu + TE[j] * KU[j, b, i]
                    ev = ev + TE[j] * KV[j, b, i]
                su = atol + rtol * max(fabs(U[b, i]), fabs(Unew[b, i]))
                sv = atol + rtol * max(fabs(V[b, i]), fabs(Vnew[b, i]))
                r = fabs(h * eu) / su
                if r > err:
                    err = r
                r = fabs(h * ev) / sv
                if r > err:
                    err = r
    return err


def window_extrema(double[::1] prefix, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t k = hi - lo + 1, n = prefix.shape[0], j, i, length
    mins_a = np.empty(k)
    maxs_a = np.empty(k)
    imin_a = np.empty(k, dtype=np.int64)
    imax_a = np.empty(k, dtype=np.int64)
    cdef double[::1] mins = mins_a, maxs = maxs_a
    cdef long long[::1] imin = imin_a, imax = imax_a
    cdef double d, dmin, dmax
    cdef long long amin, amax
    with nogil:
        for j in range(k):
            length = lo + j
            dmin = prefix[length] - prefix[0]
            dmax = dmin
            amin = 0
            amax = 0
            for i in range(1, n - length):
                d = prefix[i + length] - prefix[i]
                if d < dmin:
                    dmin = d
                    amin = i
                if d > dmax:
                    dmax = d
                    amax = i
            mins[j] = dmin / length
            maxs[j] = dmax / length
            imin[j] = amin
            imax[j] = amax
    return mins_a, imin_a, maxs_a, imax_a


def linear_recurrence(double[::1] E, double[::1] F, double w0):
    cdef Py_ssize_t n = E.shape[0], j
    out = np.empty(n + 1)
    cdef double[::1] w = out
    cdef double acc = w0
    w[0] = w0
    with nogil:
        for j in range(n):
            acc = E[j] * acc + F[j]
            w[j + 1] = acc
    return out
