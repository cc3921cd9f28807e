"""Compiled inner loops for subset sampling and the ERM dual solvers.

Per-iteration work in the ERM solvers is tiny (a few length-d dot products for
SDCA, a |S| x |S| Gram block and its factorization for SDNA), so the step
loops run as numba kernels over a batch of pre-drawn subsets. Batches are
stored CSR-style: ``idx[offsets[k]:offsets[k + 1]]`` is the k-th subset.

Status codes returned by the step kernels: 0 ok, 1 factorization failure,
2 inner solver failure.
"""
import math

import numpy as np
from numba import njit

QUADRATIC = 0
LOGISTIC = 1

OK = 0
FACTORIZATION_FAILED = 1
INNER_FAILED = 2

PIVOT_RTOL = 1e-12
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100


@njit(cache=True)
def floyd_rows(U, n):
    """Floyd's algorithm: one uniform tau-subset of range(n) per row of ``U``.

    ``U`` holds uniforms in [0, 1), one per selected element; row ``r`` of the
    result is sorted.
    """
    k, tau = U.shape
    out = np.empty((k, tau), dtype=np.int64)
    mask = np.zeros(n, dtype=np.bool_)
    for r in range(k):
        pos = 0
        for j in range(n - tau, n):
            t = int(U[r, pos] * (j + 1))
            if t > j:
                t = j
            if mask[t]:
                t = j
            mask[t] = True
            out[r, pos] = t
            pos += 1
        out[r].sort()
        for q in range(tau):
            mask[out[r, q]] = False
    return out


@njit(cache=True)
def _expit(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _entropy(s):
    out = 0.0
    if s > 0.0:
        out += s * math.log(s)
    if s < 1.0:
        out += (1.0 - s) * math.log1p(-s)
    return out


@njit(cache=True)
def logistic_conj_prox(c, vt, alpha, b):
    """argmin_h  c*h + (vt/2) h^2 + phi*(-(alpha + h)) for the logistic loss.

    With ``s = b (alpha + h)`` in (0, 1) and ``z = logit(s)`` the stationarity
    condition is ``b c + vt (s - b alpha) + z = 0``, strictly increasing in z
    with slope >= 1; solved by Newton safeguarded with bisection.
    """
    bc = b * c
    hi = -bc + vt * b * alpha
    lo = hi - vt
    if vt <= 0.0:
        return b * _expit(hi) - alpha
    z = 0.5 * (lo + hi)
    for _ in range(200):
        s = _expit(z)
        q = bc + vt * (s - b * alpha) + z
        if q > 0.0:
            hi = z
        else:
            lo = z
        zn = z - q / (1.0 + vt * s * (1.0 - s))
        if zn <= lo or zn >= hi:
            zn = 0.5 * (lo + hi)
        if abs(zn - z) <= 1e-15 * (1.0 + abs(z)):
            z = zn
            break
        z = zn
    return b * _expit(z) - alpha


@njit(cache=True)
def chol_inplace(G):
    """Lower Cholesky factor written into ``G``; False on a small/negative pivot."""
    m = G.shape[0]
    dmax = 0.0
    for j in range(m):
        if G[j, j] > dmax:
            dmax = G[j, j]
    if dmax <= 0.0:
        return False
    for j in range(m):
        s = G[j, j]
        for q in range(j):
            s -= G[j, q] * G[j, q]
        if s < PIVOT_RTOL * dmax:
            return False
        ljj = math.sqrt(s)
        G[j, j] = ljj
        for i in range(j + 1, m):
            t = G[i, j]
            for q in range(j):
                t -= G[i, q] * G[j, q]
            G[i, j] = t / ljj
    return True


@njit(cache=True)
def chol_solve_inplace(L, r):
    """Overwrite ``r`` with the solution of ``L L^T x = r``."""
    m = L.shape[0]
    for i in range(m):
        t = r[i]
        for q in range(i):
            t -= L[i, q] * r[q]
        r[i] = t / L[i, i]
    for i in range(m - 1, -1, -1):
        t = r[i]
        for q in range(i + 1, m):
            t -= L[q, i] * r[q]
        r[i] = t / L[i, i]


@njit(cache=True)
def _gram_block(At, S, inv_ln, gram):
    m = S.shape[0]
    d = At.shape[1]
    XS = np.empty((m, m))
    if gram.shape[0] > 0:
        for i in range(m):
            for j in range(i + 1):
                v = gram[S[i], S[j]] * inv_ln
                XS[i, j] = v
                XS[j, i] = v
    else:
        for i in range(m):
            ri = At[S[i]]
            for j in range(i + 1):
                rj = At[S[j]]
                v = 0.0
                for q in range(d):
                    v += ri[q] * rj[q]
                v *= inv_ln
                XS[i, j] = v
                XS[j, i] = v
    return XS


@njit(cache=True)
def _block_objective(XS, c, alpha, b, h):
    m = h.shape[0]
    val = 0.0
    for i in range(m):
        t = 0.0
        for j in range(m):
            t += XS[i, j] * h[j]
        val += c[i] * h[i] + 0.5 * h[i] * t + _entropy(b[i] * (alpha[i] + h[i]))
    return val


@njit(cache=True)
def logistic_block_solve(XS, c, alpha, b, h):
    """Damped Newton for  min_h c.h + h^T XS h / 2 + sum_i phi_i*(-(alpha_i + h_i)).

    ``h`` is overwritten with the minimizer. Returns the final gradient norm, or
    -1.0 if the tolerance was not met within NEWTON_MAX_ITER iterations.
    """
    m = h.shape[0]
    for i in range(m):
        h[i] = logistic_conj_prox(c[i], XS[i, i], alpha[i], b[i])
    g = np.empty(m)
    H = np.empty((m, m))
    s = np.empty(m)
    hn = np.empty(m)
    for _ in range(NEWTON_MAX_ITER):
        gnorm = 0.0
        for i in range(m):
            s[i] = b[i] * (alpha[i] + h[i])
            t = c[i]
            for j in range(m):
                t += XS[i, j] * h[j]
            t += b[i] * (math.log(s[i]) - math.log1p(-s[i]))
            g[i] = t
            gnorm += t * t
        gnorm = math.sqrt(gnorm)
        if gnorm <= NEWTON_TOL:
            return gnorm
        for i in range(m):
            for j in range(m):
                H[i, j] = XS[i, j]
            H[i, i] += 1.0 / (s[i] * (1.0 - s[i]))
        if not chol_inplace(H):
            return -1.0
        step = np.empty(m)
        for i in range(m):
            step[i] = -g[i]
        chol_solve_inplace(H, step)
        tmax = 1.0
        for i in range(m):
            ds = b[i] * step[i]
            if ds > 0.0:
                tmax = min(tmax, 0.99 * (1.0 - s[i]) / ds)
            elif ds < 0.0:
                tmax = min(tmax, 0.99 * s[i] / (-ds))
        slope = 0.0
        for i in range(m):
            slope += g[i] * step[i]
        f0 = _block_objective(XS, c, alpha, b, h)
        t = tmax
        moved = False
        for _ls in range(60):
            for i in range(m):
                hn[i] = h[i] + t * step[i]
            f1 = _block_objective(XS, c, alpha, b, hn)
            if f1 <= f0 + 1e-4 * t * slope + 1e-14 * (1.0 + abs(f0)):
                moved = True
                break
            t *= 0.5
        if not moved:
            return gnorm if gnorm <= 1e-8 else -1.0
        for i in range(m):
            h[i] = hn[i]
    return -1.0


@njit(cache=True)
def sdna_steps(At, b, alpha, w, idx, offsets, inv_ln, gram, loss):
    """Run SDNA steps in place over a batch of subsets.

    Returns ``(status, k)`` where ``k`` is the number of completed steps.
    """
    d = At.shape[1]
    nsteps = offsets.shape[0] - 1
    for k in range(nsteps):
        S = idx[offsets[k]:offsets[k + 1]]
        m = S.shape[0]
        XS = _gram_block(At, S, inv_ln, gram)
        c = np.empty(m)
        for j in range(m):
            row = At[S[j]]
            v = 0.0
            for q in range(d):
                v += row[q] * w[q]
            c[j] = v
        h = np.empty(m)
        if loss == QUADRATIC:
            for j in range(m):
                XS[j, j] += 1.0
                h[j] = -(c[j] + alpha[S[j]] - b[S[j]])
            if not chol_inplace(XS):
                return FACTORIZATION_FAILED, k
            chol_solve_inplace(XS, h)
        else:
            aS = np.empty(m)
            bS = np.empty(m)
            for j in range(m):
                aS[j] = alpha[S[j]]
                bS[j] = b[S[j]]
            if logistic_block_solve(XS, c, aS, bS, h) < 0.0:
                return INNER_FAILED, k
        for j in range(m):
            i = S[j]
            alpha[i] += h[j]
            coef = h[j] * inv_ln
            row = At[i]
            for q in range(d):
                w[q] += coef * row[q]
    return OK, nsteps


@njit(cache=True)
def sdca_steps(At, b, alpha, w, idx, offsets, inv_ln, vt, loss):
    """Run minibatch SDCA steps in place; every h_i in a batch sees the same w."""
    d = At.shape[1]
    nsteps = offsets.shape[0] - 1
    for k in range(nsteps):
        S = idx[offsets[k]:offsets[k + 1]]
        m = S.shape[0]
        h = np.empty(m)
        for j in range(m):
            i = S[j]
            row = At[i]
            c = 0.0
            for q in range(d):
                c += row[q] * w[q]
            if loss == QUADRATIC:
                h[j] = (b[i] - alpha[i] - c) / (vt[i] + 1.0)
            else:
                h[j] = logistic_conj_prox(c, vt[i], alpha[i], b[i])
        for j in range(m):
            i = S[j]
            alpha[i] += h[j]
            coef = h[j] * inv_ln
            row = At[i]
            for q in range(d):
                w[q] += coef * row[q]
    return OK, nsteps
