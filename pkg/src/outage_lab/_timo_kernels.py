"""Hot kernels for the two-transmitter outage integral and its partials.

With S ~ Gamma(r, q1), T ~ Gamma(r, q2) and angle weight (r-1) rho^(r-2)
on [0, 1], every quantity has the form

    int_0^1 w(rho) int_0^u g1(s) K(x) ds drho,   x = (u - s) / (1 + rho s)

where g1 is the Gamma(r, q1) density and the kernel K depends on ``kind``:

    VALUE  P(r, x/q2)                                   (inner t-integral closed)
    D2     -x^r e^{-x/q2} / ((r-1)! q2^{r+1})            d/dq2
    D22    x^r e^{-x/q2} / ((r-1)! q2^{r+2}) (r+1-x/q2)  d2/dq2^2
    D12    x^r e^{-x/q2} / ((r-1)! q2^{r+1}) (r-s/q1)/q1 d2/dq1dq2

For r = 1 the angle factor is identically zero, so the rho-integral is
replaced by evaluation at rho = 0.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import njit
from .specfun import (
    _WG,
    _WGK,
    _XGK,
    ConvergenceError,
    QuadratureSpec,
    _reg_lower_gamma,
    integrate_1d,
    reg_lower_gamma_array,
)

VALUE, D2, D22, D12 = 0, 1, 2, 3
KIND_NAMES = {VALUE: "value", D2: "d/dq2", D22: "d2/dq2dq2", D12: "d2/dq1dq2"}

# Gamma(r, q1) mass beyond q1*(2r + 60) is below 1e-24 for every r
_TAIL_SPAN = 60.0
_INNER_FAIL = 1e300


# The inner (s) and outer (rho) integrals each have their own panel
# evaluator and driver loop.  Passing integrands as function arguments
# would be shorter but numba cannot cache such specializations, which
# costs several seconds of compilation in every new process.


@njit
def _kronrod_nodes(a, b, out):
    """Fill ``out[15]`` with the nodes: centre, then -/+ pairs."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    out[0] = c
    for j in range(7):
        out[1 + 2 * j] = c - h * _XGK[j]
        out[2 + 2 * j] = c + h * _XGK[j]


@njit
def _kronrod_combine(a, b, fv, ev):
    """(integral, error) of one panel from integrand values at the nodes.

    ``ev`` carries per-node error contributions of the integrand itself
    (non-zero only when the integrand is an integral); they are added to
    the QUADPACK estimate with the Kronrod weights.
    """
    h = 0.5 * (b - a)
    fc = fv[0]
    resg = fc * _WG[3]
    resk = fc * _WGK[7]
    resabs = abs(resk)
    extra = ev[0] * _WGK[7]
    for j in range(7):
        f1 = fv[1 + 2 * j]
        f2 = fv[2 + 2 * j]
        resk += _WGK[j] * (f1 + f2)
        resabs += _WGK[j] * (abs(f1) + abs(f2))
        extra += _WGK[j] * (ev[1 + 2 * j] + ev[2 + 2 * j])
        if j % 2 == 1:
            resg += _WG[j // 2] * (f1 + f2)
    reskh = 0.5 * resk
    resasc = _WGK[7] * abs(fc - reskh)
    for j in range(7):
        resasc += _WGK[j] * (abs(fv[1 + 2 * j] - reskh) + abs(fv[2 + 2 * j] - reskh))
    ah = abs(h)
    result = resk * h
    resabs *= ah
    resasc *= ah
    err = abs((resk - resg) * h)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > 2.2250738585072014e-308 / (50.0 * 2.220446049250313e-16):
        err = max(50.0 * 2.220446049250313e-16 * resabs, err)
    return result, err + extra * ah


@njit
def _sift_down(heap, m, err, pos):
    """Restore the max-heap (keyed by ``err``) below ``pos``."""
    while True:
        c = 2 * pos + 1
        if c >= m:
            return
        if c + 1 < m and err[heap[c + 1]] > err[heap[c]]:
            c += 1
        if err[heap[c]] <= err[heap[pos]]:
            return
        heap[pos], heap[c] = heap[c], heap[pos]
        pos = c


@njit
def _sift_up(heap, err, pos):
    while pos > 0:
        parent = (pos - 1) // 2
        if err[heap[parent]] >= err[heap[pos]]:
            return
        heap[pos], heap[parent] = heap[parent], heap[pos]
        pos = parent


@njit
def _exact_sums(val, err, n):
    total = 0.0
    terr = 0.0
    for i in range(n):
        total += val[i]
        terr += err[i]
    return total, terr


# Globally adaptive bisection.  Panels live in parallel arrays (lo, hi,
# val, err) with a binary max-heap of indices keyed by err, so the panel
# to split next is always heap[0].  Running totals are updated
# incrementally and recomputed exactly every 64 splits and before
# accepting convergence.  Status: 0 ok, 1 panel limit reached, 2 panel
# too narrow to split, 3 integrand failure (an error of _INNER_FAIL).


@njit
def _panels(limit, n_edges):
    cap = max(limit, n_edges - 1) + 1
    return np.empty(cap), np.empty(cap), np.empty(cap), np.empty(cap), np.empty(cap, dtype=np.int64)


@njit
def _add_panel(lo, hi, val, err, heap, n, a, b, v, e):
    lo[n] = a
    hi[n] = b
    val[n] = v
    err[n] = e
    heap[n] = n
    _sift_up(heap, err, n)
    return n + 1


@njit
def _next_split(lo, hi, val, err, heap, n, total, terr, since, abs_tol, rel_tol, limit):
    """Decide the next move: (status, total, terr, since) with status -1
    meaning split heap[0], otherwise a final status code."""
    if since >= 64 or terr <= max(abs_tol, rel_tol * abs(total)):
        total, terr = _exact_sums(val, err, n)
        since = 0
    if terr <= max(abs_tol, rel_tol * abs(total)):
        return 0, total, terr, since
    if n >= limit:
        return 1, total, terr, since
    k = heap[0]
    a = lo[k]
    b = hi[k]
    mid = 0.5 * (a + b)
    if not (a < mid < b) or (b - a) < 8.0 * 2.220446049250313e-16 * max(abs(a), abs(b)):
        return 2, total, terr, since
    return -1, total, terr, since


@njit
def _apply_split(lo, hi, val, err, heap, n, v1, e1, v2, e2, total, terr):
    """Replace the top panel by its halves; returns (n, total, terr)."""
    k = heap[0]
    mid = 0.5 * (lo[k] + hi[k])
    b = hi[k]
    total += v1 + v2 - val[k]
    terr += e1 + e2 - err[k]
    hi[k] = mid
    val[k] = v1
    err[k] = e1
    _sift_down(heap, n, err, 0)
    n = _add_panel(lo, hi, val, err, heap, n, mid, b, v2, e2)
    return n, total, terr


@njit
def _s_edges(rho, r, u, q1, q2):
    """Panel edges in s: the Gamma(r, q1) mode, and the points where
    x/q2 reaches the mode and the far tail of the q2 kernel."""
    s_max = min(u, q1 * (2.0 * r + _TAIL_SPAN))
    pts = np.empty(5)
    pts[0] = 0.0
    pts[1] = s_max
    n = 2
    p = r * q1
    if 0.0 < p < s_max:
        pts[n] = p
        n += 1
    for X in ((r + 1.0) * q2, (2.0 * r + _TAIL_SPAN) * q2):
        p = (u - X) / (1.0 + rho * X)
        if 0.0 < p < s_max:
            pts[n] = p
            n += 1
    return np.sort(pts[:n])


@njit
def _inner_integrand(s, kind, rho, r, u, q1, q2, lgr):
    x = (u - s) / (1.0 + rho * s)
    if s <= 0.0 or x <= 0.0:
        return 0.0
    lg1 = -s / q1 - lgr - r * math.log(q1)
    if r > 1.0:
        lg1 += (r - 1.0) * math.log(s)
    if kind == VALUE:
        return math.exp(lg1) * _reg_lower_gamma(r, x / q2, lgr)
    z = x / q2
    lk = lg1 + r * math.log(x) - z - lgr
    if kind == D2:
        return -math.exp(lk - (r + 1.0) * math.log(q2))
    if kind == D22:
        return math.exp(lk - (r + 2.0) * math.log(q2)) * (r + 1.0 - z)
    return math.exp(lk - (r + 1.0) * math.log(q2)) * (r - s / q1) / q1


@njit
def _inner_panel(a, b, kind, rho, r, u, q1, q2, lgr, nodes, fv, ev):
    _kronrod_nodes(a, b, nodes)
    for i in range(15):
        fv[i] = _inner_integrand(nodes[i], kind, rho, r, u, q1, q2, lgr)
        ev[i] = 0.0
    return _kronrod_combine(a, b, fv, ev)


@njit
def _inner(kind, rho, r, u, q1, q2, lgr, abs_tol, rel_tol, limit):
    """int_0^u g1(s) K(x) ds at fixed rho: (value, error, status)."""
    edges = _s_edges(rho, r, u, q1, q2)
    lo, hi, val, err, heap = _panels(limit, edges.shape[0])
    nodes = np.empty(15)
    fv = np.empty(15)
    ev = np.empty(15)
    n = 0
    for i in range(edges.shape[0] - 1):
        if edges[i + 1] > edges[i]:
            v, e = _inner_panel(edges[i], edges[i + 1], kind, rho, r, u, q1, q2, lgr, nodes, fv, ev)
            n = _add_panel(lo, hi, val, err, heap, n, edges[i], edges[i + 1], v, e)
    total, terr = _exact_sums(val, err, n)
    since = 0
    while True:
        status, total, terr, since = _next_split(lo, hi, val, err, heap, n, total, terr, since,
                                                 abs_tol, rel_tol, limit)
        if status >= 0:
            return total, terr, status
        k = heap[0]
        mid = 0.5 * (lo[k] + hi[k])
        v1, e1 = _inner_panel(lo[k], mid, kind, rho, r, u, q1, q2, lgr, nodes, fv, ev)
        v2, e2 = _inner_panel(mid, hi[k], kind, rho, r, u, q1, q2, lgr, nodes, fv, ev)
        n, total, terr = _apply_split(lo, hi, val, err, heap, n, v1, e1, v2, e2, total, terr)
        since += 1


@njit
def _outer_panel(a, b, kind, r, u, q1, q2, lgr, abs_tol, rel_tol, limit, nodes, fv, ev):
    """Kronrod panel in rho; err is _INNER_FAIL if any inner integral failed."""
    _kronrod_nodes(a, b, nodes)
    for i in range(15):
        rho = nodes[i]
        v, e, status = _inner(kind, rho, r, u, q1, q2, lgr, abs_tol, rel_tol, limit)
        if status != 0:
            return v, _INNER_FAIL
        w = 1.0 if r == 2.0 else (r - 1.0) * rho ** (r - 2.0)
        fv[i] = w * v
        ev[i] = w * e
    return _kronrod_combine(a, b, fv, ev)


@njit
def timo_integral_numba(kind, r, lgr, u, q1, q2, abs_tol, rel_tol, limit):
    """Returns (value, error estimate, status); status 0 ok, 1 outer, 2 inner failure.

    ``lgr`` is ln Gamma(r), computed by the caller.
    """
    rf = float(r)
    if r == 1:
        v, e, status = _inner(kind, 0.0, rf, u, q1, q2, lgr, abs_tol, rel_tol, limit)
        return v, e, 0 if status == 0 else 2
    # inner integrals run ten times tighter so their errors stay minor
    itol_a = 0.1 * abs_tol
    itol_r = 0.1 * rel_tol
    lo, hi, val, err, heap = _panels(limit, 2)
    nodes = np.empty(15)
    fv = np.empty(15)
    ev = np.empty(15)
    v, e = _outer_panel(0.0, 1.0, kind, rf, u, q1, q2, lgr, itol_a, itol_r, limit, nodes, fv, ev)
    if e >= _INNER_FAIL:
        return v, e, 2
    n = _add_panel(lo, hi, val, err, heap, 0, 0.0, 1.0, v, e)
    total, terr = v, e
    since = 0
    while True:
        status, total, terr, since = _next_split(lo, hi, val, err, heap, n, total, terr, since,
                                                 abs_tol, rel_tol, limit)
        if status >= 0:
            return total, terr, 0 if status == 0 else 1
        k = heap[0]
        mid = 0.5 * (lo[k] + hi[k])
        v1, e1 = _outer_panel(lo[k], mid, kind, rf, u, q1, q2, lgr, itol_a, itol_r, limit, nodes, fv, ev)
        v2, e2 = _outer_panel(mid, hi[k], kind, rf, u, q1, q2, lgr, itol_a, itol_r, limit, nodes, fv, ev)
        if e1 >= _INNER_FAIL or e2 >= _INNER_FAIL:
            return total, _INNER_FAIL, 2
        n, total, terr = _apply_split(lo, hi, val, err, heap, n, v1, e1, v2, e2, total, terr)
        since += 1


# ---------------------------------------------------------------------------
# numpy twin


def _inner_integrand_np(s, kind, rho, r, u, q1, q2, lgr):
    s = np.asarray(s, dtype=float)
    x = (u - s) / (1.0 + rho * s)
    ok = (s > 0.0) & (x > 0.0)
    out = np.zeros_like(s)
    if not np.any(ok):
        return out
    s = s[ok]
    x = x[ok]
    lg1 = -s / q1 - lgr - r * math.log(q1)
    if r > 1:
        lg1 = lg1 + (r - 1.0) * np.log(s)
    if kind == VALUE:
        out[ok] = np.exp(lg1) * reg_lower_gamma_array(float(r), x / q2)
        return out
    z = x / q2
    lk = lg1 + r * np.log(x) - z - lgr
    if kind == D2:
        out[ok] = -np.exp(lk - (r + 1.0) * math.log(q2))
    elif kind == D22:
        out[ok] = np.exp(lk - (r + 2.0) * math.log(q2)) * (r + 1.0 - z)
    else:
        out[ok] = np.exp(lk - (r + 1.0) * math.log(q2)) * (r - s / q1) / q1
    return out


def _s_edges_np(rho, r, u, q1, q2):
    s_max = min(u, q1 * (2.0 * r + _TAIL_SPAN))
    cands = [r * q1] + [(u - X) / (1.0 + rho * X) for X in ((r + 1.0) * q2, (2.0 * r + _TAIL_SPAN) * q2)]
    pts = sorted(p for p in cands if 0.0 < p < s_max)
    return 0.0, s_max, pts


class _InnerFailure(Exception):
    pass


def timo_integral_numpy(kind, r, u, q1, q2, quad: QuadratureSpec):
    """Same integral through the Python adaptive driver with vectorized integrands."""
    lgr = math.lgamma(r)
    inner_spec = quad.tighter() if r > 1 else quad
    inner_err = [0.0]

    def inner(rho):
        lo, hi, pts = _s_edges_np(rho, r, u, q1, q2)
        try:
            v, e = integrate_1d(
                lambda s: _inner_integrand_np(s, kind, rho, r, u, q1, q2, lgr),
                lo, hi, inner_spec, points=pts, vectorized=True,
            )
        except ConvergenceError as exc:
            raise _InnerFailure(exc.value, exc.err) from exc
        inner_err[0] = max(inner_err[0], e)
        return v

    def outer(rho):
        w = 1.0 if r == 2 else (r - 1.0) * rho ** (r - 2.0)
        return w * inner(rho)

    try:
        if r == 1:
            return inner(0.0), inner_err[0], 0
        v, e = integrate_1d(outer, 0.0, 1.0, quad)
    except _InnerFailure as exc:
        return exc.args[0], exc.args[1], 2 if r > 1 else 1
    except ConvergenceError as exc:
        return exc.value, exc.err, 1
    return v, e + inner_err[0], 0
