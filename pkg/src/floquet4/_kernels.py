"""Adaptive DOP853 integration of the companion system and its companions.

The state is a padded complex array of shape ``(rows, 6)`` holding, in order,

* ``M``       rows 0..3, columns 0..3 (columns 4, 5 stay zero),
* ``dM/dλ``   4 more rows (optional),
* ``Λ²M``     6 rows, the second compound matrix (optional),
* ``dΛ²M/dλ`` 6 more rows (optional).

The companion matrix has unit super-diagonal and last row
``(λ - q, -p', -p, 0)``; all right-hand sides below exploit that sparsity.
The second compound obeys ``Y' = A^[2] Y`` with the additive compound of
the companion matrix; its trace is the second elementary symmetric function
of the multipliers, which stays accurate relative to ``e^{x+|y|}`` instead of
``e^{2x}``.

Two drivers share this layout: a per-λ numba kernel and a batched numpy
integrator that advances many λ with one common step sequence.
"""

import math

import numpy as np

from . import _dop853 as _tab
from ._jit import HAVE_NUMBA, njit

_A = np.ascontiguousarray(_tab.A)
_B = np.ascontiguousarray(_tab.B)
_C = np.ascontiguousarray(_tab.C)
_E3 = np.ascontiguousarray(_tab.E3)
_E5 = np.ascontiguousarray(_tab.E5)
_NS = _tab.N_STAGES

MAX_STEPS = 200_000

# status codes returned by the kernels
OK = 0
TOO_MANY_STEPS = 1
NON_FINITE = 2


def layout(derivative: bool, compound: bool):
    """Row offsets ``(n_rows, o_dM, o_Y, o_dY)``; ``-1`` marks an absent block."""
    rows = 4
    o_dm = o_y = o_dy = -1
    if derivative:
        o_dm = rows
        rows += 4
    if compound:
        o_y = rows
        rows += 6
        if derivative:
            o_dy = rows
            rows += 6
    return rows, o_dm, o_y, o_dy


def initial_state(derivative: bool, compound: bool) -> np.ndarray:
    rows, _, o_y, _ = layout(derivative, compound)
    s = np.zeros((rows, 6), dtype=np.complex128)
    for k in range(4):
        s[k, k] = 1.0
    if o_y >= 0:
        for k in range(6):
            s[o_y + k, k] = 1.0
    return s


@njit(cache=True)
def _coef_at(t, pc, pcos, psin, qc, qcos, qsin):
    p = pc
    pp = 0.0
    q = qc
    w = 2.0 * math.pi * t
    for k in range(pcos.shape[0]):
        c = math.cos((k + 1) * w)
        s = math.sin((k + 1) * w)
        om = 2.0 * math.pi * (k + 1)
        p += pcos[k] * c + psin[k] * s
        pp += om * (psin[k] * c - pcos[k] * s)
    for k in range(qcos.shape[0]):
        c = math.cos((k + 1) * w)
        s = math.sin((k + 1) * w)
        q += qcos[k] * c + qsin[k] * s
    return p, pp, q


@njit(cache=True)
def _rhs(t, S, out, lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy):
    p, pp, q = _coef_at(t, pc, pcos, psin, qc, qcos, qsin)
    a0 = lam - q
    a1 = -pp
    a2 = -p
    for j in range(4):
        out[0, j] = S[1, j]
        out[1, j] = S[2, j]
        out[2, j] = S[3, j]
        out[3, j] = a0 * S[0, j] + a1 * S[1, j] + a2 * S[2, j]
    if o_dm >= 0:
        r = o_dm
        for j in range(4):
            out[r, j] = S[r + 1, j]
            out[r + 1, j] = S[r + 2, j]
            out[r + 2, j] = S[r + 3, j]
            out[r + 3, j] = a0 * S[r, j] + a1 * S[r + 1, j] + a2 * S[r + 2, j] + S[0, j]
    if o_y >= 0:
        for blk in range(2):
            r = o_y if blk == 0 else o_dy
            if r < 0:
                continue
            # compound rows ordered (01, 02, 03, 12, 13, 23)
            for j in range(6):
                y0 = S[r, j]
                y1 = S[r + 1, j]
                y2 = S[r + 2, j]
                y3 = S[r + 3, j]
                y4 = S[r + 4, j]
                y5 = S[r + 5, j]
                out[r, j] = y1
                out[r + 1, j] = y3 + y2
                out[r + 2, j] = y4 + a1 * y0 + a2 * y1
                out[r + 3, j] = y4
                out[r + 4, j] = y5 - a0 * y0 + a2 * y3
                out[r + 5, j] = -a0 * y1 - a1 * y3
                if blk == 1:
                    out[r + 4, j] -= S[o_y, j]
                    out[r + 5, j] -= S[o_y + 1, j]


@njit(cache=True)
def _stages(t, h, y, K, ytmp, lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy):
    """Fill K[1..11] given K[0] = f(t, y); returns nothing, y_new left in ytmp."""
    R = y.shape[0]
    for s in range(1, _NS):
        for r in range(R):
            for j in range(6):
                acc = 0j
                for m in range(s):
                    a = _A[s, m]
                    if a != 0.0:
                        acc += a * K[m, r, j]
                ytmp[r, j] = y[r, j] + h * acc
        _rhs(t + _C[s] * h, ytmp, K[s], lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
    for r in range(R):
        for j in range(6):
            acc = 0j
            for m in range(_NS):
                acc += _B[m] * K[m, r, j]
            ytmp[r, j] = y[r, j] + h * acc


@njit(cache=True)
def _integrate_one(lam, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy,
                   rtol, h0, h_max, max_steps, steps_out):
    """Adaptive DOP853 on [0, 1] for one λ.

    Returns ``(y, n_accepted, err_sum, status)``; accepted step sizes are
    written to ``steps_out`` (used by the step-halving estimate).
    """
    R = y0.shape[0]
    y = y0.copy()
    K = np.zeros((_NS + 1, R, 6), dtype=np.complex128)
    ytmp = np.zeros((R, 6), dtype=np.complex128)
    t = 0.0
    h = h0
    _rhs(t, y, K[0], lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
    n_acc = 0
    n_tot = 0
    err_sum = 0.0
    scale = np.empty(R)
    n_live = 0
    for r in range(R):
        n_live += 4 if (r < 4 or (o_dm >= 0 and o_dm <= r < o_dm + 4)) else 6
    while t < 1.0:
        if n_tot >= max_steps:
            return y, n_acc, err_sum, TOO_MANY_STEPS
        n_tot += 1
        if t + h > 1.0:
            h = 1.0 - t
        _stages(t, h, y, K, ytmp, lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
        _rhs(t + h, ytmp, K[_NS], lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
        # row-relative scaling: each row of each block carries its own magnitude
        for r in range(R):
            m = 0.0
            for j in range(6):
                a = abs(y[r, j])
                b = abs(ytmp[r, j])
                if a > m:
                    m = a
                if b > m:
                    m = b
            scale[r] = 1e-300 + rtol * m
        e5 = 0.0
        e3 = 0.0
        finite = True
        for r in range(R):
            for j in range(6):
                a5 = 0j
                a3 = 0j
                for m in range(_NS + 1):
                    a5 += _E5[m] * K[m, r, j]
                    a3 += _E3[m] * K[m, r, j]
                v5 = abs(a5) / scale[r]
                v3 = abs(a3) / scale[r]
                e5 += v5 * v5
                e3 += v3 * v3
            if not np.isfinite(scale[r]):
                finite = False
        if not finite or not np.isfinite(e5):
            return y, n_acc, err_sum, NON_FINITE
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h * e5 / math.sqrt((e5 + 0.01 * e3) * n_live)
        if err <= 1.0:
            t += h
            for r in range(R):
                for j in range(6):
                    y[r, j] = ytmp[r, j]
                    K[0, r, j] = K[_NS, r, j]
            if n_acc < steps_out.shape[0]:
                steps_out[n_acc] = h
            n_acc += 1
            err_sum += err * rtol
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, max(0.2, 0.9 * err ** (-1.0 / 8.0)))
            h = min(h * fac, h_max)
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return y, n_acc, err_sum, OK


@njit(cache=True)
def _integrate_fixed(lam, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy, steps):
    """DOP853 with a prescribed step sequence (no error control)."""
    R = y0.shape[0]
    y = y0.copy()
    K = np.zeros((_NS + 1, R, 6), dtype=np.complex128)
    ytmp = np.zeros((R, 6), dtype=np.complex128)
    t = 0.0
    for i in range(steps.shape[0]):
        h = steps[i]
        _rhs(t, y, K[0], lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
        _stages(t, h, y, K, ytmp, lam, pc, pcos, psin, qc, qcos, qsin, o_dm, o_y, o_dy)
        t += h
        for r in range(R):
            for j in range(6):
                y[r, j] = ytmp[r, j]
    return y


@njit(cache=True)
def _integrate_many_nb(lams, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy,
                       rtol, h_max, max_steps, halving):
    B = lams.shape[0]
    R = y0.shape[0]
    out = np.zeros((B, R, 6), dtype=np.complex128)
    errs = np.zeros(B)
    nsteps = np.zeros(B, dtype=np.int64)
    status = np.zeros(B, dtype=np.int64)
    steps = np.zeros(max_steps)
    for b in range(B):
        lam = lams[b]
        h0 = min(h_max, 0.25 / (1.0 + abs(lam) ** 0.25))
        y, n, es, st = _integrate_one(lam, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy,
                                      rtol, h0, h_max, max_steps, steps)
        out[b] = y
        nsteps[b] = n
        status[b] = st
        errs[b] = es
        if halving and st == OK:
            half = np.empty(2 * n)
            for i in range(n):
                half[2 * i] = 0.5 * steps[i]
                half[2 * i + 1] = 0.5 * steps[i]
            coarse = _integrate_fixed(lam, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy,
                                      steps[:n].copy())
            fine = _integrate_fixed(lam, pc, pcos, psin, qc, qcos, qsin, y0, o_dm, o_y, o_dy, half)
            num = 0.0
            den = 0.0
            for r in range(4):
                for j in range(4):
                    d = abs(coarse[r, j] - fine[r, j])
                    a = abs(fine[r, j])
                    if d > num:
                        num = d
                    if a > den:
                        den = a
            errs[b] = num / den
    return out, errs, nsteps, status


# ---------------------------------------------------------------------------
# batched numpy fallback


def _rhs_np(t, S, lam, coef, o_dm, o_y, o_dy):
    p, pp, q = _coef_at_np(t, coef)
    a0 = (lam - q)[:, None]
    a1 = -pp
    a2 = -p
    out = np.zeros_like(S)
    out[:, 0:3, :4] = S[:, 1:4, :4]
    out[:, 3, :4] = a0 * S[:, 0, :4] + a1 * S[:, 1, :4] + a2 * S[:, 2, :4]
    if o_dm >= 0:
        r = o_dm
        out[:, r:r + 3, :4] = S[:, r + 1:r + 4, :4]
        out[:, r + 3, :4] = (a0 * S[:, r, :4] + a1 * S[:, r + 1, :4]
                             + a2 * S[:, r + 2, :4] + S[:, 0, :4])
    for r in (o_y, o_dy):
        if r < 0:
            continue
        y0, y1, y2, y3, y4, y5 = (S[:, r + k, :] for k in range(6))
        out[:, r] = y1
        out[:, r + 1] = y3 + y2
        out[:, r + 2] = y4 + a1 * y0 + a2 * y1
        out[:, r + 3] = y4
        out[:, r + 4] = y5 - a0 * y0 + a2 * y3
        out[:, r + 5] = -a0 * y1 - a1 * y3
        if r == o_dy:
            out[:, r + 4] -= S[:, o_y]
            out[:, r + 5] -= S[:, o_y + 1]
    return out


def _coef_at_np(t, coef):
    pc, pcos, psin, qc, qcos, qsin = coef
    k = np.arange(1, len(pcos) + 1)
    w = 2.0 * np.pi * k * t
    c, s = np.cos(w), np.sin(w)
    p = pc + pcos @ c + psin @ s
    pp = (2.0 * np.pi * k * (psin * c - pcos * s)).sum()
    kq = np.arange(1, len(qcos) + 1)
    wq = 2.0 * np.pi * kq * t
    q = qc + qcos @ np.cos(wq) + qsin @ np.sin(wq)
    return float(p), float(pp), float(q)


def _integrate_many_np(lams, coef, y0, o_dm, o_y, o_dy, rtol, h_max, max_steps):
    """All λ advance together; the step is the one the worst λ accepts."""
    B = lams.shape[0]
    R = y0.shape[0]
    y = np.broadcast_to(y0, (B, R, 6)).copy()
    live = np.zeros((R, 6), dtype=bool)
    live[:, :] = True
    live[:4, 4:] = False
    if o_dm >= 0:
        live[o_dm:o_dm + 4, 4:] = False
    n_live = int(live.sum())
    t = 0.0
    h = min(h_max, 0.25 / (1.0 + np.abs(lams).max() ** 0.25))
    K = np.zeros((_NS + 1, B, R, 6), dtype=np.complex128)
    K[0] = _rhs_np(t, y, lams, coef, o_dm, o_y, o_dy)
    n_acc = 0
    n_tot = 0
    err_sum = np.zeros(B)
    status = OK
    while t < 1.0:
        if n_tot >= max_steps:
            status = TOO_MANY_STEPS
            break
        n_tot += 1
        h = min(h, 1.0 - t)
        for s in range(1, _NS):
            ytmp = y + h * np.tensordot(_A[s, :s], K[:s], axes=(0, 0))
            K[s] = _rhs_np(t + _C[s] * h, ytmp, lams, coef, o_dm, o_y, o_dy)
        y_new = y + h * np.tensordot(_B, K[:_NS], axes=(0, 0))
        K[_NS] = _rhs_np(t + h, y_new, lams, coef, o_dm, o_y, o_dy)
        scale = 1e-300 + rtol * np.maximum(np.abs(y), np.abs(y_new)).max(axis=2)
        e5 = np.tensordot(_E5, K, axes=(0, 0)) / scale[:, :, None]
        e3 = np.tensordot(_E3, K, axes=(0, 0)) / scale[:, :, None]
        n5 = (np.abs(e5) ** 2).sum(axis=(1, 2))
        n3 = (np.abs(e3) ** 2).sum(axis=(1, 2))
        if not (np.all(np.isfinite(n5)) and np.all(np.isfinite(scale))):
            status = NON_FINITE
            break
        den = np.sqrt((n5 + 0.01 * n3) * n_live)
        errs = np.where(den > 0, h * n5 / np.where(den > 0, den, 1.0), 0.0)
        err = float(errs.max())
        if err <= 1.0:
            t += h
            y = y_new
            K[0] = K[_NS]
            n_acc += 1
            err_sum += errs * rtol
            fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** (-1.0 / 8.0)))
            h = min(h * fac, h_max)
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
    nsteps = np.full(B, n_acc, dtype=np.int64)
    st = np.full(B, status, dtype=np.int64)
    return y, err_sum, nsteps, st


def integrate_many(lams, coef_arrays, derivative=False, compound=False, rtol=1e-13,
                   h_max=0.0625, max_steps=MAX_STEPS, halving=False, use_numba=None):
    """Integrate the requested blocks for every λ in ``lams``.

    ``coef_arrays`` is ``(p_const, p_cos, p_sin, q_const, q_cos, q_sin)``.
    Returns ``(states, err_est, n_steps, status)`` with ``states`` of shape
    ``(len(lams), rows, 6)``.
    """
    lams = np.ascontiguousarray(np.atleast_1d(np.asarray(lams, dtype=np.complex128)))
    rows, o_dm, o_y, o_dy = layout(derivative, compound)
    y0 = initial_state(derivative, compound)
    pc, pcos, psin, qc, qcos, qsin = coef_arrays
    pcos = np.ascontiguousarray(pcos, dtype=np.float64)
    psin = np.ascontiguousarray(psin, dtype=np.float64)
    qcos = np.ascontiguousarray(qcos, dtype=np.float64)
    qsin = np.ascontiguousarray(qsin, dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if lams.size == 0:
        return (np.zeros((0, rows, 6), dtype=np.complex128), np.zeros(0),
                np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    if use_numba:
        return _integrate_many_nb(lams, float(pc), pcos, psin, float(qc), qcos, qsin, y0,
                                  o_dm, o_y, o_dy, float(rtol), float(h_max),
                                  int(max_steps), bool(halving))
    coef = (float(pc), pcos, psin, float(qc), qcos, qsin)
    y, errs, nsteps, status = _integrate_many_np(lams, coef, y0, o_dm, o_y, o_dy,
                                                 float(rtol), float(h_max), int(max_steps))
    if halving:
        # the batched path has no stored step list; compare against a tighter run
        y2, _, _, _ = _integrate_many_np(lams, coef, y0, o_dm, o_y, o_dy,
                                         float(rtol) * 1e-2, float(h_max), int(max_steps))
        num = np.abs(y[:, :4, :4] - y2[:, :4, :4]).max(axis=(1, 2))
        den = np.abs(y2[:, :4, :4]).max(axis=(1, 2))
        errs = num / den
    return y, errs, nsteps, status
