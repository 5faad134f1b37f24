"""Per-draw Monte Carlo kernels with numpy twins.

Random numbers are always generated by numpy outside these functions, so
both backends see identical inputs.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import njit


@njit
def logdets_numba(H, qs):
    """log det(I + H diag(q) H*) for every draw in ``H`` (n, r, t) and every
    row ``q`` of ``qs`` (m, t).  Failed factorizations give NaN."""
    n, r, t = H.shape
    m = qs.shape[0]
    out = np.empty((m, n))
    M = np.empty((r, r), dtype=np.complex128)
    L = np.zeros((r, r), dtype=np.complex128)
    for d in range(n):
        for p in range(m):
            for i in range(r):
                for j in range(i + 1):
                    acc = 0.0 + 0.0j
                    for c in range(t):
                        acc += qs[p, c] * H[d, i, c] * H[d, j, c].conjugate()
                    if i == j:
                        acc += 1.0
                    M[i, j] = acc
            logdet = 0.0
            ok = True
            for j in range(r):
                s = M[j, j].real
                for k in range(j):
                    s -= L[j, k].real ** 2 + L[j, k].imag ** 2
                if not (s > 0.0 and s < np.inf):
                    ok = False
                    break
                dj = math.sqrt(s)
                L[j, j] = dj
                logdet += 2.0 * math.log(dj)
                for i in range(j + 1, r):
                    acc = M[i, j]
                    for k in range(j):
                        acc -= L[i, k] * L[j, k].conjugate()
                    L[i, j] = acc / dj
            out[p, d] = logdet if ok else np.nan
    return out


def logdets_numpy(H, qs):
    n, r, _ = H.shape
    out = np.empty((qs.shape[0], n))
    eye = np.eye(r)
    for p, q in enumerate(qs):
        M = eye + np.einsum("dic,c,djc->dij", H, q, H.conj())
        try:
            L = np.linalg.cholesky(M)
            diag = np.real(np.diagonal(L, axis1=1, axis2=2))
            with np.errstate(invalid="ignore", divide="ignore"):
                out[p] = 2.0 * np.log(diag).sum(axis=1)
        except np.linalg.LinAlgError:
            for d in range(n):
                try:
                    L = np.linalg.cholesky(M[d])
                    out[p, d] = 2.0 * np.log(np.real(np.diag(L))).sum()
                except np.linalg.LinAlgError:
                    out[p, d] = np.nan
    out[~np.isfinite(out)] = np.nan
    return out


@njit
def reduced_hits_numba(S, T, rho, threshold):
    hits = 0
    for i in range(S.shape[0]):
        if 1.0 + S[i] + T[i] + S[i] * T[i] * rho[i] < threshold:
            hits += 1
    return hits


def reduced_hits_numpy(S, T, rho, threshold):
    return int(np.count_nonzero(1.0 + S + T + S * T * rho < threshold))


@njit
def special_q_logdets_numba(lam_prime, ha, hb, qa, qb):
    """log of (prod lambda') * ((1 + qa m_a)(1 + qb m_b) - qa qb |xi|^2)."""
    n, r = lam_prime.shape
    out = np.empty(n)
    for d in range(n):
        ma = 0.0
        mb = 0.0
        xi = 0.0 + 0.0j
        lp = 0.0
        for i in range(r):
            w = 1.0 / lam_prime[d, i]
            a = ha[d, i]
            b = hb[d, i]
            ma += w * (a.real * a.real + a.imag * a.imag)
            mb += w * (b.real * b.real + b.imag * b.imag)
            xi += w * a.conjugate() * b
            lp += math.log(lam_prime[d, i])
        f = (1.0 + qa * ma) * (1.0 + qb * mb) - qa * qb * (xi.real * xi.real + xi.imag * xi.imag)
        out[d] = lp + math.log(f) if f > 0.0 else np.nan
    return out


def special_q_logdets_numpy(lam_prime, ha, hb, qa, qb):
    w = 1.0 / lam_prime
    ma = (w * np.abs(ha) ** 2).sum(axis=1)
    mb = (w * np.abs(hb) ** 2).sum(axis=1)
    xi = (w * ha.conj() * hb).sum(axis=1)
    f = (1.0 + qa * ma) * (1.0 + qb * mb) - qa * qb * np.abs(xi) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.log(lam_prime).sum(axis=1) + np.log(f)
    out[~(f > 0)] = np.nan
    return out
