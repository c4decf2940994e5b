# cython: language_level=3
"""Compiled event-driven and grid-stepping kernels.

Mirrors ``detq._pure`` operation for operation so both produce identical bits.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fmod, INFINITY

cnp.import_array()


cdef inline double wrap(double x, double L) noexcept nogil:
    cdef double r = fmod(x, L)
    if r < 0.0:
        r += L
    if r >= L:
        r = 0.0
    return r


cdef double run_one(double[::1] q, long[::1] s, double t, double t_final, double L, double tol,
                    const long[::1] tgt, const long[::1] crs, const double[::1] pos,
                    const long[::1] kind, double[::1] dt, double[::1] snap_dt,
                    list rec_time, list rec_off, list rec_pts) except? -1.0:
    # rec_* are None in the batch path; that path never touches Python objects
    cdef Py_ssize_t P = pos.shape[0], N = q.shape[0], p, k
    cdef long j, i, c
    cdef double best, d, t_ev, thr, rest, probe_w = 0.0
    cdef bint record = rec_time is not None
    while P > 0:
        best = INFINITY
        for p in range(P):
            j = crs[p]
            d = wrap((pos[p] - q[j]) * <double>s[j], L)
            if d == 0.0:
                d = L
            dt[p] = d
            if d < best:
                best = d
        t_ev = t + best
        if t_ev > t_final:
            break
        thr = best + tol
        for k in range(N):
            q[k] = wrap(q[k] + <double>s[k] * best, L)
            snap_dt[k] = -1.0
        for p in range(P):
            if dt[p] <= thr:
                j = crs[p]
                if dt[p] >= snap_dt[j]:
                    snap_dt[j] = dt[p]
                    q[j] = pos[p]
        for p in range(P):
            if dt[p] <= thr:
                c = kind[p]
                i = tgt[p]
                if c == 0:
                    s[i] = -s[i]
                elif c == 1:
                    s[i] = 1
                elif c == 2:
                    s[i] = -1
                else:
                    probe_w += 0.5 if t_ev == t_final else 1.0
                if record:
                    rec_pts.append(p)
        if record:
            rec_time.append(t_ev)
            rec_off.append(len(rec_pts))
        t = t_ev
    rest = t_final - t
    if rest > 0.0:
        for k in range(N):
            q[k] = wrap(q[k] + <double>s[k] * rest, L)
    return probe_w


cdef double run_one_nogil(double[::1] q, long[::1] s, double t, double t_final, double L, double tol,
                          const long[::1] tgt, const long[::1] crs, const double[::1] pos,
                          const long[::1] kind, double[::1] dt, double[::1] snap_dt) noexcept nogil:
    cdef Py_ssize_t P = pos.shape[0], N = q.shape[0], p, k
    cdef long j, i, c
    cdef double best, d, t_ev, thr, rest, probe_w = 0.0
    while P > 0:
        best = INFINITY
        for p in range(P):
            j = crs[p]
            d = wrap((pos[p] - q[j]) * <double>s[j], L)
            if d == 0.0:
                d = L
            dt[p] = d
            if d < best:
                best = d
        t_ev = t + best
        if t_ev > t_final:
            break
        thr = best + tol
        for k in range(N):
            q[k] = wrap(q[k] + <double>s[k] * best, L)
            snap_dt[k] = -1.0
        for p in range(P):
            if dt[p] <= thr:
                j = crs[p]
                if dt[p] >= snap_dt[j]:
                    snap_dt[j] = dt[p]
                    q[j] = pos[p]
        for p in range(P):
            if dt[p] <= thr:
                c = kind[p]
                i = tgt[p]
                if c == 0:
                    s[i] = -s[i]
                elif c == 1:
                    s[i] = 1
                elif c == 2:
                    s[i] = -1
                else:
                    probe_w += 0.5 if t_ev == t_final else 1.0
        t = t_ev
    rest = t_final - t
    if rest > 0.0:
        for k in range(N):
            q[k] = wrap(q[k] + <double>s[k] * rest, L)
    return probe_w


def simulate_events(q, s, double t0, double t_final, double L, double tol,
                    tgt, crs, pos, kind, bint record=True):
    cdef double[::1] qv = np.array(q, dtype=np.float64)
    cdef long[::1] sv = np.array(s, dtype=np.int64)
    cdef const long[::1] tv = np.ascontiguousarray(tgt, dtype=np.int64)
    cdef const long[::1] cv = np.ascontiguousarray(crs, dtype=np.int64)
    cdef const double[::1] pv = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const long[::1] kv = np.ascontiguousarray(kind, dtype=np.int64)
    cdef double[::1] dt = np.zeros(pv.shape[0], dtype=np.float64)
    cdef double[::1] snap = np.zeros(qv.shape[0], dtype=np.float64)
    rec_time, rec_off, rec_pts = [], [0], []
    if record:
        w = run_one(qv, sv, t0, t_final, L, tol, tv, cv, pv, kv, dt, snap, rec_time, rec_off, rec_pts)
    else:
        w = run_one_nogil(qv, sv, t0, t_final, L, tol, tv, cv, pv, kv, dt, snap)
    return (np.asarray(qv), np.asarray(sv),
            np.array(rec_time, dtype=np.float64), np.array(rec_off, dtype=np.int64),
            np.array(rec_pts, dtype=np.int64), w)


def simulate_batch(Q, S, double t0, double t_final, double L, double tol, tgt, crs, pos, kind):
    cdef double[:, ::1] Qv = np.array(Q, dtype=np.float64, order="C")
    cdef long[:, ::1] Sv = np.array(S, dtype=np.int64, order="C")
    cdef const long[::1] tv = np.ascontiguousarray(tgt, dtype=np.int64)
    cdef const long[::1] cv = np.ascontiguousarray(crs, dtype=np.int64)
    cdef const double[::1] pv = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const long[::1] kv = np.ascontiguousarray(kind, dtype=np.int64)
    cdef Py_ssize_t M = Qv.shape[0], m
    cdef double[::1] probe = np.zeros(M, dtype=np.float64)
    cdef double[::1] dt = np.zeros(pv.shape[0], dtype=np.float64)
    cdef double[::1] snap = np.zeros(Qv.shape[1], dtype=np.float64)
    with nogil:
        for m in range(M):
            probe[m] = run_one_nogil(Qv[m], Sv[m], t0, t_final, L, tol, tv, cv, pv, kv, dt, snap)
    return np.asarray(Qv), np.asarray(Sv), np.asarray(probe)


def discrete_run(cells, spins, long G, long steps, tgt, crs, bidx, kind, bint record=True):
    cdef long[::1] c = np.array(cells, dtype=np.int64)
    cdef long[::1] s = np.array(spins, dtype=np.int64)
    cdef const long[::1] tv = np.ascontiguousarray(tgt, dtype=np.int64)
    cdef const long[::1] cv = np.ascontiguousarray(crs, dtype=np.int64)
    cdef const long[::1] bv = np.ascontiguousarray(bidx, dtype=np.int64)
    cdef const long[::1] kv = np.ascontiguousarray(kind, dtype=np.int64)
    cdef Py_ssize_t N = c.shape[0], P = bv.shape[0], k, p
    cdef long n, old, new, code, i, crossed
    cdef bint fired
    ev_step, ev_off, ev_pts = [], [0], []
    for n in range(steps):
        fired = False
        for k in range(N):
            old = c[k]
            new = (old + s[k]) % G
            if new < 0:
                new += G
            c[k] = new
            crossed = new if s[k] > 0 else old
            for p in range(P):
                if cv[p] != k or bv[p] != crossed:
                    continue
                code = kv[p]
                i = tv[p]
                if code == 0:
                    s[i] = -s[i]
                elif code == 1:
                    s[i] = 1
                elif code == 2:
                    s[i] = -1
                fired = True
                if record:
                    ev_pts.append(p)
        if record and fired:
            ev_step.append(n + 1)
            ev_off.append(len(ev_pts))
    return (np.asarray(c), np.asarray(s), np.array(ev_step, dtype=np.int64),
            np.array(ev_off, dtype=np.int64), np.array(ev_pts, dtype=np.int64))
