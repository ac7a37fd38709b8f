"""Compiled inner loops for the sequential (symbol-by-symbol) receivers."""

import numpy as np
from numba import njit

MODE_LE = 0
MODE_APP = 1
MODE_EP = 2


@njit(cache=True)
def _demap(xe, ve, logprior, points, energies):
    M = points.size
    metric = np.empty(M)
    best = -np.inf
    for m in range(M):
        d = xe - points[m]
        metric[m] = logprior[m] - (d.real * d.real + d.imag * d.imag) / ve
        if metric[m] > best:
            best = metric[m]
    if best == -np.inf:
        # every metric overflowed (v_e far below the symbol spacing): hard decision
        near = 0
        dmin = np.inf
        for m in range(M):
            d = xe - points[m]
            dist = d.real * d.real + d.imag * d.imag
            if logprior[m] > -np.inf and dist < dmin:
                dmin = dist
                near = m
        return points[near], 0.0
    total = 0.0
    for m in range(M):
        metric[m] = np.exp(metric[m] - best)
        total += metric[m]
    mu = 0j
    second = 0.0
    for m in range(M):
        p = metric[m] / total
        mu += p * points[m]
        second += p * energies[m]
    gamma = second - (mu.real * mu.real + mu.imag * mu.imag)
    if gamma < 0.0:
        gamma = 0.0
    return mu, gamma


@njit(cache=True)
def iv_dfe_loop(base, g_c, v_e, logprior, points, energies, ep, gamma_bar, rho):
    """Sequential causal cancellation for static filters.

    ``base[k]`` holds every term of the estimate that does not involve the
    causal feedback; ``g_c`` is already conjugated.
    """
    K = base.size
    npp = g_c.size
    xc = np.zeros(npp + K, dtype=np.complex128)
    x_e = np.empty(K, dtype=np.complex128)
    mu_d = np.empty(K, dtype=np.complex128)
    gamma_d = np.empty(K)
    g = gamma_bar
    clamped = False
    if ep and g >= rho * v_e:
        g = rho * v_e
        clamped = True
    for k in range(K):
        acc = 0j
        for i in range(npp):
            acc += g_c[i] * xc[k + i]
        xe = base[k] - acc
        x_e[k] = xe
        mu, gam = _demap(xe, v_e, logprior[k], points, energies)
        mu_d[k] = mu
        gamma_d[k] = gam
        if ep:
            xc[npp + k] = (mu * v_e - xe * g) / (v_e - g)
        else:
            xc[npp + k] = mu
    return x_e, mu_d, gamma_d, xc[npp:], clamped


@njit(cache=True)
def chol_solve(S, b):
    """Solve ``S x = b`` for Hermitian ``S``; returns ``(x, ok)``."""
    n = b.size
    Lm = np.zeros((n, n), dtype=np.complex128)
    for j in range(n):
        s = S[j, j].real
        for p in range(j):
            s -= Lm[j, p].real ** 2 + Lm[j, p].imag ** 2
        if not s > 0.0:
            return np.zeros(n, dtype=np.complex128), False
        d = np.sqrt(s)
        Lm[j, j] = d
        for i in range(j + 1, n):
            t = S[i, j]
            for p in range(j):
                t -= Lm[i, p] * np.conj(Lm[j, p])
            Lm[i, j] = t / d
    z = np.empty(n, dtype=np.complex128)
    for i in range(n):
        t = b[i]
        for p in range(i):
            t -= Lm[i, p] * z[p]
        z[i] = t / Lm[i, i].real
    x = np.empty(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        t = z[i]
        for p in range(i + 1, n):
            t -= np.conj(Lm[p, i]) * x[p]
        x[i] = t / Lm[i, i].real
    return x, True


@njit(cache=True)
def tv_loop(Yw, H, sigma_w2, xp_pad, vp_pad, edge_v, npp, logprior, points, energies, mode, rho):
    """Per-symbol filter computation and estimation.

    ``xp_pad``/``vp_pad`` hold the prior means/variances with ``npp``
    leading and ``N_d`` trailing edge entries.
    """
    K = Yw.shape[0]
    N = H.shape[0]
    W = H.shape[1]
    x_e = np.empty(K, dtype=np.complex128)
    v_e = np.empty(K)
    mu_d = np.empty(K, dtype=np.complex128)
    gamma_d = np.empty(K)
    xc = np.zeros(npp + K, dtype=np.complex128)
    vc = np.full(npp + K, edge_v)
    clamps = 0
    failures = 0
    h0 = H[:, npp].copy()
    # no estimate can beat the matched-filter bound
    ve_floor = 1e-300
    h0_energy = 0.0
    for r in range(N):
        h0_energy += h0[r].real ** 2 + h0[r].imag ** 2
    if sigma_w2 / h0_energy > ve_floor:
        ve_floor = sigma_w2 / h0_energy
    v = np.empty(W)
    xbar = np.empty(W, dtype=np.complex128)
    S = np.empty((N, N), dtype=np.complex128)
    for k in range(K):
        for i in range(W):
            if i < npp and mode != MODE_LE:
                v[i] = vc[k + i]
                xbar[i] = xc[k + i]
            else:
                v[i] = vp_pad[k + i]
                xbar[i] = xp_pad[k + i]
        trace = 0.0
        for r in range(N):
            for c in range(r, N):
                acc = 0j
                for i in range(W):
                    acc += H[r, i] * v[i] * np.conj(H[c, i])
                S[r, c] = acc
                S[c, r] = np.conj(acc)
            S[r, r] += sigma_w2
            trace += S[r, r].real
        s, ok = chol_solve(S, h0)
        if not ok:
            failures += 1
            jitter = 1e-12 * trace / N
            for r in range(N):
                S[r, r] += jitter
            s, ok = chol_solve(S, h0)
            if not ok:
                raise np.linalg.LinAlgError("covariance matrix is not positive definite")
        xi = 0.0
        for r in range(N):
            xi += (np.conj(h0[r]) * s[r]).real
        # x_e = xbar_center + f^H (y - H xbar),  f = s / xi
        acc = 0j
        for r in range(N):
            resid = Yw[k, r]
            for i in range(W):
                resid -= H[r, i] * xbar[i]
            acc += np.conj(s[r]) * resid
        xe = xbar[npp] + acc / xi
        ve = 1.0 / xi - v[npp]
        if ve < ve_floor:
            ve = ve_floor
        x_e[k] = xe
        v_e[k] = ve
        mu, gam = _demap(xe, ve, logprior[k], points, energies)
        mu_d[k] = mu
        gamma_d[k] = gam
        if mode == MODE_APP:
            xc[npp + k] = mu
            vc[npp + k] = gam
        elif mode == MODE_EP:
            g = gam
            if g >= rho * ve:
                g = rho * ve
                clamps += 1
            xc[npp + k] = (mu * ve - xe * g) / (ve - g)
            vc[npp + k] = ve * g / (ve - g)
    return x_e, v_e, mu_d, gamma_d, xc[npp:], vc[npp:], clamps, failures


@njit(cache=True)
def mean_app_variance(x, z, logprior, ve_grid, points, energies):
    """Mean posterior variance of ``x + sqrt(v_e) z`` for every ``v_e`` in the grid."""
    S = x.size
    V = ve_grid.size
    out = np.zeros(V)
    for j in range(V):
        ve = ve_grid[j]
        sd = np.sqrt(ve)
        acc = 0.0
        for s in range(S):
            _, gam = _demap(x[s] + sd * z[s], ve, logprior[s], points, energies)
            acc += gam
        out[j] = acc / S
    return out
