"""Pure-Python kernels; the reference the Cython build must match bit for bit.

Conventions shared with ``_kernels.pyx``:

* particle indices are 0-based;
* point tables arrive pre-sorted in tie-break order;
* kind codes: 0 flip, 1 set_plus, 2 set_minus, 3 probe (no action, only counted).
"""
from math import fmod, inf

import numpy as np

PROBE = 3


def wrap(x, L):
    r = fmod(x, L)
    if r < 0.0:
        r += L
    if r >= L:
        r = 0.0
    return r


def _run(q, s, t, t_final, L, tol, tgt, crs, pos, kind, record):
    """Advance lists ``q``/``s`` in place from ``t`` to ``t_final``."""
    P = len(pos)
    N = len(q)
    ev_time, ev_off, ev_pts = [], [0], []
    probe_w = 0.0
    dt = [0.0] * P
    snap_dt = [0.0] * N
    while P:
        best = inf
        for p in range(P):
            j = crs[p]
            d = wrap((pos[p] - q[j]) * s[j], L)
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
            q[k] = wrap(q[k] + s[k] * best, L)
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
                    ev_pts.append(p)
        if record:
            ev_time.append(t_ev)
            ev_off.append(len(ev_pts))
        t = t_ev
    rest = t_final - t
    if rest > 0.0:
        for k in range(N):
            q[k] = wrap(q[k] + s[k] * rest, L)
    return ev_time, ev_off, ev_pts, probe_w


def simulate_events(q, s, t0, t_final, L, tol, tgt, crs, pos, kind, record=True):
    ql = [float(x) for x in q]
    sl = [int(x) for x in s]
    ev_time, ev_off, ev_pts, probe_w = _run(
        ql, sl, float(t0), float(t_final), float(L), float(tol),
        [int(x) for x in tgt], [int(x) for x in crs], [float(x) for x in pos],
        [int(x) for x in kind], record,
    )
    return (np.array(ql, dtype=np.float64), np.array(sl, dtype=np.int64),
            np.array(ev_time, dtype=np.float64), np.array(ev_off, dtype=np.int64),
            np.array(ev_pts, dtype=np.int64), probe_w)


def simulate_batch(Q, S, t0, t_final, L, tol, tgt, crs, pos, kind):
    Q = np.array(Q, dtype=np.float64)
    S = np.array(S, dtype=np.int64)
    tgt_l = [int(x) for x in tgt]
    crs_l = [int(x) for x in crs]
    pos_l = [float(x) for x in pos]
    kind_l = [int(x) for x in kind]
    probe = np.zeros(len(Q), dtype=np.float64)
    t0, t_final, L, tol = float(t0), float(t_final), float(L), float(tol)
    for m in range(len(Q)):
        ql = Q[m].tolist()
        sl = S[m].tolist()
        *_, w = _run(ql, sl, t0, t_final, L, tol, tgt_l, crs_l, pos_l, kind_l, False)
        Q[m] = ql
        S[m] = sl
        probe[m] = w
    return Q, S, probe


def discrete_run(cells, spins, G, steps, tgt, crs, bidx, kind, record=True):
    """Split stepping on integer cells.

    Within a step particles move one at a time in index order; right after
    particle ``k`` moves, the points it crossed act.  Moving up from cell
    ``c`` crosses boundary ``c+1``; moving down crosses boundary ``c``.
    Points are assumed sorted by crosser, so actions come in tie-break order.
    """
    c = [int(x) for x in cells]
    s = [int(x) for x in spins]
    tgt = [int(x) for x in tgt]
    crs = [int(x) for x in crs]
    bidx = [int(x) for x in bidx]
    kind = [int(x) for x in kind]
    N, P = len(c), len(bidx)
    ev_step, ev_off, ev_pts = [], [0], []
    for n in range(steps):
        fired = False
        for k in range(N):
            old = c[k]
            new = (old + s[k]) % G
            c[k] = new
            crossed = new if s[k] > 0 else old
            for p in range(P):
                if crs[p] != k or bidx[p] != crossed:
                    continue
                code = kind[p]
                i = tgt[p]
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
    return (np.array(c, dtype=np.int64), np.array(s, dtype=np.int64),
            np.array(ev_step, dtype=np.int64), np.array(ev_off, dtype=np.int64),
            np.array(ev_pts, dtype=np.int64))
