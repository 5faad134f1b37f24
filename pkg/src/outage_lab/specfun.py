"""Gamma-family special functions and adaptive Gauss-Kronrod quadrature.

``_reg_lower_gamma`` is written so numba can compile it (the compiled
Gauss-Kronrod driver lives next to its integrands in ``_timo_kernels``); the public ``integrate_1d``/``integrate_2d`` are
plain Python drivers over arbitrary callables and double as the numpy
fallback path of the analytic TIMO engine.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ._accel import njit

__all__ = [
    "ConvergenceError",
    "QuadratureSpec",
    "log_gamma",
    "reg_lower_gamma",
    "reg_lower_gamma_array",
    "complex_multivariate_log_gamma",
    "integrate_1d",
    "integrate_2d",
]

EPS = np.finfo(float).eps
_TINY = 1e-300


class ConvergenceError(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before meeting its tolerance."""

    def __init__(self, message: str, value: float = math.nan, err: float = math.nan):
        super().__init__(message)
        self.value = value
        self.err = err


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if not (self.abs_tol > 0 or self.rel_tol > 0):
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be a positive integer")

    def tighter(self, factor: float = 0.1) -> "QuadratureSpec":
        """Spec for an inner integral whose errors feed an outer one."""
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor, self.max_subdivisions)


# ---------------------------------------------------------------------------
# gamma family


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


@njit
def _reg_lower_gamma(a, x, lga):
    # lga = ln Gamma(a), supplied by the caller: math.lgamma blocks numba caching
    if x <= 0.0:
        return 0.0
    log_pref = -x + a * math.log(x) - lga
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(10000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        return min(1.0, total * math.exp(log_pref))
    # Lentz continued fraction for the upper tail
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return max(0.0, 1.0 - math.exp(log_pref) * h)


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x), i.e. the Gamma(a, 1) CDF at x."""
    if not a > 0:
        raise ValueError(f"reg_lower_gamma requires a > 0, got a={a}")
    if not x >= 0:
        raise ValueError(f"reg_lower_gamma requires x >= 0, got x={x}")
    if math.isinf(x):
        return 1.0
    return float(_reg_lower_gamma(float(a), float(x), math.lgamma(a)))


def reg_lower_gamma_array(a: float, x) -> np.ndarray:
    """Vectorized P(a, x) over an array of x (series below a+1, continued fraction above)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    if not np.any(pos):
        return out
    xs = x[pos]
    log_pref = -xs + a * np.log(xs) - math.lgamma(a)
    res = np.empty_like(xs)

    lo = xs < a + 1.0
    if np.any(lo):
        xl = xs[lo]
        term = np.full_like(xl, 1.0 / a)
        total = term.copy()
        ap = a
        for _ in range(10000):
            ap += 1.0
            term *= xl / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * 1e-17):
                break
        res[lo] = np.minimum(1.0, total * np.exp(log_pref[lo]))

    hi = ~lo
    if np.any(hi):
        xh = xs[hi]
        b = xh + 1.0 - a
        c = np.full_like(xh, 1.0 / _TINY)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, 10000):
            an = -i * (i - a)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < _TINY, _TINY, d)
            c = b + an / c
            c = np.where(np.abs(c) < _TINY, _TINY, c)
            d = 1.0 / d
            delta = d * c
            h = h * delta
            if np.all(np.abs(delta - 1.0) < 1e-16):
                break
        res[hi] = np.maximum(0.0, 1.0 - np.exp(log_pref[hi]) * h)

    out[pos] = res
    return out


def complex_multivariate_log_gamma(m: int, n: int) -> float:
    """ln Gamma_m(n) = m(m-1)/2 ln(pi) + sum_{i=1..m} ln Gamma(n-i+1)."""
    if m < 1 or n < m:
        raise ValueError(f"complex multivariate gamma needs n >= m >= 1, got m={m}, n={n}")
    return 0.5 * m * (m - 1) * math.log(math.pi) + sum(math.lgamma(n - i + 1) for i in range(1, m + 1))


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15 rule

XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# tuples, not arrays: numba will not cache functions that read global arrays
_XGK = tuple(float(v) for v in XGK)
_WGK = tuple(float(v) for v in WGK)
_WG = tuple(float(v) for v in WG)

# all 15 abscissae in [-1, 1] with matching Kronrod and Gauss weights
_NODES15 = np.concatenate([-XGK[:7], [0.0], XGK[6::-1]])
_WK15 = np.concatenate([WGK[:7], [WGK[7]], WGK[6::-1]])
_WG15 = np.zeros(15)
for _j in (1, 3, 5):
    _WG15[_j] = _WG15[14 - _j] = WG[_j // 2]
_WG15[7] = WG[3]


def _panel(f, a: float, b: float, vectorized: bool) -> tuple[float, float]:
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * _NODES15
    if vectorized:
        fx = np.asarray(f(x), dtype=float)
        if fx.shape != x.shape:
            raise ValueError("vectorized integrand must return an array shaped like its input")
    else:
        fx = np.array([float(f(xi)) for xi in x])
    if not np.all(np.isfinite(fx)):
        raise ValueError(f"integrand is not finite on [{a}, {b}]")
    resk = float(_WK15 @ fx)
    resg = float(_WG15 @ fx)
    reskh = 0.5 * resk
    ah = abs(h)
    resabs = float(_WK15 @ np.abs(fx)) * ah
    resasc = float(_WK15 @ np.abs(fx - reskh)) * ah
    err = abs((resk - resg) * h)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * EPS):
        err = max(50.0 * EPS * resabs, err)
    return resk * h, err


def integrate_1d(
    f: Callable,
    lo: float,
    hi: float,
    spec: QuadratureSpec | None = None,
    *,
    points: Iterable[float] | None = None,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod (7/15) integral of ``f`` over ``[lo, hi]``.

    ``points`` are interior breakpoints that seed the panel list.  With
    ``vectorized=True`` the integrand receives all 15 abscissae of a panel
    at once.  Raises :class:`ConvergenceError` instead of returning an
    estimate that misses ``max(abs_tol, rel_tol*|value|)``.
    """
    spec = spec or QuadratureSpec()
    lo = float(lo)
    hi = float(hi)
    if not hi >= lo:
        raise ValueError(f"integrate_1d needs lo <= hi, got [{lo}, {hi}]")
    if hi == lo:
        return 0.0, 0.0
    edges = sorted({lo, hi, *(float(p) for p in (points or ()) if lo < p < hi)})

    heap: list[tuple[float, int, float, float, float]] = []
    counter = 0
    total = 0.0
    terr = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _panel(f, a, b, vectorized)
        heapq.heappush(heap, (-e, counter, a, b, v))
        counter += 1
        total += v
        terr += e

    while terr > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if len(heap) >= spec.max_subdivisions:
            raise ConvergenceError(
                f"no convergence on [{lo}, {hi}] after {len(heap)} subdivisions "
                f"(value {total:.17g}, error estimate {terr:.3g})",
                total,
                terr,
            )
        neg_e, _, a, b, v = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b) or (b - a) < 8.0 * EPS * max(abs(a), abs(b)):
            raise ConvergenceError(f"panel [{a}, {b}] too narrow to split", total, terr)
        v1, e1 = _panel(f, a, mid, vectorized)
        v2, e2 = _panel(f, mid, b, vectorized)
        heapq.heappush(heap, (-e1, counter, a, mid, v1))
        heapq.heappush(heap, (-e2, counter + 1, mid, b, v2))
        counter += 2
        # re-sum rather than update incrementally to avoid drift
        total = math.fsum(item[4] for item in heap)
        terr = math.fsum(-item[0] for item in heap)
    return total, terr


def integrate_2d(
    f: Callable,
    region: tuple[float, float, float, float],
    spec: QuadratureSpec | None = None,
    *,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Iterated integral of ``f(x, y)`` over ``x0 <= x <= x1, y0 <= y <= y1``.

    The inner (y) integrals run at a tenth of the outer tolerance; the
    returned error bound adds the largest inner error estimate to the outer
    one.  Inner failures are re-raised naming the axis and the x at which
    they happened.
    """
    spec = spec or QuadratureSpec()
    x0, x1, y0, y1 = (float(v) for v in region)
    inner_spec = spec.tighter()
    inner_err = [0.0]

    def inner(x: float) -> float:
        try:
            if vectorized:
                v, e = integrate_1d(lambda y: f(np.full_like(y, x), y), y0, y1, inner_spec, vectorized=True)
            else:
                v, e = integrate_1d(lambda y: f(x, y), y0, y1, inner_spec)
        except ConvergenceError as exc:
            raise ConvergenceError(f"inner (y) axis at x={x!r}: {exc}", exc.value, exc.err) from exc
        inner_err[0] = max(inner_err[0], e)
        return v

    try:
        value, err = integrate_1d(inner, x0, x1, spec)
    except ConvergenceError as exc:
        if str(exc).startswith("inner"):
            raise
        raise ConvergenceError(f"outer (x) axis: {exc}", exc.value, exc.err) from exc
    return value, err + inner_err[0] * (x1 - x0)
