"""Two-transmitter (t = 2) outage probability, its derivatives, and the
derivative test for non-optimality of the conjectured power splits.

``f(q1, q2) = Pr[1 + S + T + S*T*rho < e^R]`` with S = q1|h1|^2,
T = q2|h2|^2 and rho the angle factor.  Interior values come from a
(rho, s) double integral; anything evaluated at q1 = 0 or q2 = 0 uses
closed forms only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _timo_kernels as kern
from ._accel import resolve_backend
from .core import ChannelSpec, OutageEstimate, PowerSplit
from .specfun import ConvergenceError, QuadratureSpec, reg_lower_gamma

__all__ = [
    "DEFAULT_TAU",
    "ConjectureVerdict",
    "DerivativeReport",
    "MinSplit",
    "BoundarySecond",
    "outage_timo",
    "outage_value",
    "partial_df_dq1",
    "partial_df_dq2",
    "partial_d2f_dq1dq1",
    "partial_d2f_dq2dq2",
    "partial_d2f_dq1dq2",
    "boundary_partials_first",
    "boundary_partials_second",
    "total_first_derivative",
    "total_second_derivative",
    "derivative_report",
    "theorem1_check",
    "find_min_split",
    "fd_total_derivatives",
]

DEFAULT_TAU = 1e-6


def _integral(kind: int, q1: float, q2: float, spec: ChannelSpec, quad: QuadratureSpec | None, backend):
    quad = quad or QuadratureSpec()
    if backend == "numba":
        v, e, status = kern.timo_integral_numba(
            kind, spec.r, math.lgamma(spec.r), spec.u, q1, q2,
            quad.abs_tol, quad.rel_tol, quad.max_subdivisions,
        )
    else:
        v, e, status = kern.timo_integral_numpy(kind, spec.r, spec.u, q1, q2, quad)
    if status != 0:
        axis = "inner (s)" if status == 2 else "outer (rho)"
        raise ConvergenceError(
            f"{kern.KIND_NAMES[kind]} integral at q1={q1!r}, q2={q2!r} did not converge on the "
            f"{axis} axis within {quad.max_subdivisions} subdivisions",
            v, e,
        )
    return float(v), float(e)


def _interior(split: PowerSplit, what: str) -> None:
    if split.q1 <= 0 or split.q2 <= 0:
        raise ValueError(f"{what} needs q1 > 0 and q2 > 0 (use boundary_partials_* at the ends)")


NEGLIGIBLE_SIDE = 1e-9


def outage_timo(
    split: PowerSplit,
    spec: ChannelSpec,
    quad: QuadratureSpec | None = None,
    *,
    backend: str | None = None,
) -> OutageEstimate:
    """Outage probability f(q1, q2) by quadrature.

    The trace constraint q1 + q2 = P is not enforced here so that partial
    derivatives can be checked off the constraint line; use
    ``split.check(spec)`` when it matters.  With one power zero the result
    is the closed form P(r, u/(q1+q2)).
    """
    spec.require_timo()
    if split.q1 == 0 and split.q2 == 0:
        return OutageEstimate(1.0, 0.0, 1, "quadrature")
    if split.q1 == 0 or split.q2 == 0:
        p = reg_lower_gamma(spec.r, spec.u / (split.q1 + split.q2))
        return OutageEstimate(p, 0.0, 1, "quadrature", meta={"form": "closed"})
    total = split.q1 + split.q2
    small = min(split.q1, split.q2)
    if small <= NEGLIGIBLE_SIDE * total:
        # first-order expansion about the nearest corner; the quadrature
        # cannot resolve a kernel this narrow
        corner = ChannelSpec(spec.t, spec.r, spec.rate_R, total)
        a0, a1 = boundary_partials_first(corner)
        step = small * (a1 - a0)
        p = reg_lower_gamma(spec.r, spec.u / total) + step
        return OutageEstimate(min(max(p, 0.0), 1.0), abs(step), 1, "quadrature", meta={"form": "expansion"})
    v, e = _integral(kern.VALUE, split.q1, split.q2, spec, quad, resolve_backend(backend))
    return OutageEstimate(min(max(v, 0.0), 1.0), e, 1, "quadrature", meta={"form": "integral"})


def outage_value(q1: float, spec: ChannelSpec, quad: QuadratureSpec | None = None, *, backend=None) -> float:
    """f(q1, P - q1) as a plain float."""
    return outage_timo(PowerSplit.on_line(q1, spec.power_P), spec, quad, backend=backend).p_hat


def partial_df_dq2(split, spec, quad=None, *, backend=None) -> float:
    spec.require_timo()
    _interior(split, "partial_df_dq2")
    return _integral(kern.D2, split.q1, split.q2, spec, quad, resolve_backend(backend))[0]


def partial_df_dq1(split, spec, quad=None, *, backend=None) -> float:
    """df/dq1 at (q1, q2), i.e. df/dq2 at the swapped point."""
    return partial_df_dq2(split.swapped(), spec, quad, backend=backend)


def partial_d2f_dq2dq2(split, spec, quad=None, *, backend=None) -> float:
    spec.require_timo()
    _interior(split, "partial_d2f_dq2dq2")
    return _integral(kern.D22, split.q1, split.q2, spec, quad, resolve_backend(backend))[0]


def partial_d2f_dq1dq1(split, spec, quad=None, *, backend=None) -> float:
    return partial_d2f_dq2dq2(split.swapped(), spec, quad, backend=backend)


def partial_d2f_dq1dq2(split, spec, quad=None, *, backend=None) -> float:
    spec.require_timo()
    _interior(split, "partial_d2f_dq1dq2")
    return _integral(kern.D12, split.q1, split.q2, spec, quad, resolve_backend(backend))[0]


# ---------------------------------------------------------------------------
# closed forms at the ends of the constraint line


def _gamma_pdf_at_u(spec: ChannelSpec) -> float:
    """Density of Gamma(r, P) at u."""
    r, u, P = spec.r, spec.u, spec.power_P
    return math.exp((r - 1) * math.log(u) - u / P - math.lgamma(r) - r * math.log(P))


def boundary_partials_first(spec: ChannelSpec) -> tuple[float, float]:
    """df/dq2 at (q1, q2) = (0, P) and at (P, 0)."""
    spec.require_timo()
    r, u, P = spec.r, spec.u, spec.power_P
    g = _gamma_pdf_at_u(spec)
    at_q1_zero = -g * u / P
    at_q2_zero = -g * (r + (r - 1) * u)
    return at_q1_zero, at_q2_zero


class BoundarySecond(NamedTuple):
    d2q2_at_q1_zero: float
    d2q2_at_q2_zero: float
    mixed_at_q1_zero: float
    mixed_at_q2_zero: float


def boundary_partials_second(spec: ChannelSpec) -> BoundarySecond:
    """d2f/dq2^2 and d2f/dq1dq2 at (0, P) and (P, 0)."""
    spec.require_timo()
    r, u, P = spec.r, spec.u, spec.power_P
    base = _gamma_pdf_at_u(spec) * u / P  # u^r e^{-u/P} / ((r-1)! P^{r+1})
    d2_q1_zero = base / P * (r + 1 - u / P)
    d2_q2_zero = base * r * (r + 1) * (
        P * (r - 1) * (1 / u + 1) ** 2 - 1 / u - 2 * (r - 1) / r - u * (r - 1) / (r + 1)
    )
    mixed = base / P * (r * P / u - 1) * (r + (r - 1) * u)
    return BoundarySecond(d2_q1_zero, d2_q2_zero, mixed, mixed)


def _at_end(q1: float, P: float) -> bool:
    return q1 == 0.0 or q1 == P


def total_first_derivative(q1: float, spec: ChannelSpec, quad=None, *, backend=None) -> float:
    """d/dq1 of f(q1, P - q1); one-sided at the ends, exactly 0 at P/2."""
    spec.require_timo()
    P = spec.power_P
    if not 0 <= q1 <= P:
        raise ValueError(f"q1={q1} outside [0, {P}]")
    if 2.0 * q1 == P:
        return 0.0
    if _at_end(q1, P):
        at_q1_zero, at_q2_zero = boundary_partials_first(spec)
        # df/dq1 at (0, P) equals df/dq2 at (P, 0) by symmetry
        d = at_q2_zero - at_q1_zero
        return d if q1 == 0.0 else -d
    split = PowerSplit.on_line(q1, P)
    return partial_df_dq1(split, spec, quad, backend=backend) - partial_df_dq2(split, spec, quad, backend=backend)


def total_second_derivative(q1: float, spec: ChannelSpec, quad=None, *, backend=None) -> float:
    """d2/dq1^2 of f(q1, P - q1) = f_11 + f_22 - 2 f_12."""
    spec.require_timo()
    P = spec.power_P
    if not 0 <= q1 <= P:
        raise ValueError(f"q1={q1} outside [0, {P}]")
    if _at_end(q1, P):
        b = boundary_partials_second(spec)
        return b.d2q2_at_q2_zero + b.d2q2_at_q1_zero - 2.0 * b.mixed_at_q1_zero
    split = PowerSplit.on_line(q1, P)
    f22 = partial_d2f_dq2dq2(split, spec, quad, backend=backend)
    f11 = f22 if 2.0 * q1 == P else partial_d2f_dq1dq1(split, spec, quad, backend=backend)
    f12 = partial_d2f_dq1dq2(split, spec, quad, backend=backend)
    return f11 + f22 - 2.0 * f12


@dataclass(frozen=True)
class DerivativeReport:
    d1_at_zero: float
    d2_at_zero: float
    d1_at_half: float
    d2_at_half: float
    partials: dict = field(default_factory=dict)


def derivative_report(spec: ChannelSpec, quad=None, *, backend=None) -> DerivativeReport:
    """First and second constrained derivatives at q1 = 0 and q1 = P/2."""
    spec.require_timo()
    P = spec.power_P
    at_q1_zero, at_q2_zero = boundary_partials_first(spec)
    b = boundary_partials_second(spec)
    half = PowerSplit(P / 2, P / 2)
    f22 = partial_d2f_dq2dq2(half, spec, quad, backend=backend)
    f12 = partial_d2f_dq1dq2(half, spec, quad, backend=backend)
    partials = {
        "zero.df_dq1": at_q2_zero,
        "zero.df_dq2": at_q1_zero,
        "zero.d2f_dq1dq1": b.d2q2_at_q2_zero,
        "zero.d2f_dq2dq2": b.d2q2_at_q1_zero,
        "zero.d2f_dq1dq2": b.mixed_at_q1_zero,
        "half.d2f_dq1dq1": f22,
        "half.d2f_dq2dq2": f22,
        "half.d2f_dq1dq2": f12,
    }
    return DerivativeReport(
        d1_at_zero=at_q2_zero - at_q1_zero,
        d2_at_zero=b.d2q2_at_q2_zero + b.d2q2_at_q1_zero - 2.0 * b.mixed_at_q1_zero,
        d1_at_half=0.0,
        d2_at_half=2.0 * (f22 - f12),
        partials=partials,
    )


# ---------------------------------------------------------------------------
# derivative test


@dataclass(frozen=True)
class ConjectureVerdict:
    """Outcome of a derivative test.

    ``verdict`` is ``counterexample`` when the sufficient condition for a
    better interior split holds, ``conjecture_holds`` when some required
    sign is clearly wrong (the test finds no counterexample), and
    ``inconclusive`` when a deciding value sits inside (-tau, tau).
    """

    verdict: str
    counterexample_found: bool
    tau: float
    values: dict
    notes: tuple = ()


def _sign(x: float, tau: float) -> int:
    if x <= -tau:
        return -1
    if x >= tau:
        return 1
    return 0


def theorem1_check(spec: ChannelSpec, quad=None, *, tau: float = DEFAULT_TAU, backend=None) -> ConjectureVerdict:
    """Check whether f(q, P-q) decreases away from both q = 0 and q = P/2.

    Only first/second order is examined at q = 0 and second order at
    q = P/2 (the first derivative there vanishes by symmetry and is not
    tested numerically).
    """
    spec.require_timo()
    rep = derivative_report(spec, quad, backend=backend)
    notes = ["d1_at_half is zero by symmetry"]

    s1 = _sign(rep.d1_at_zero, tau)
    if s1 < 0:
        start = True
        notes.append("f decreases from q1=0 at first order")
    elif s1 > 0:
        start = False
    else:
        s2 = _sign(rep.d2_at_zero, tau)
        start = None if s2 == 0 else s2 < 0
        notes.append("first derivative at q1=0 within tau; second order decides")

    sc = _sign(rep.d2_at_half, tau)
    center = None if sc == 0 else sc < 0

    if start is False or center is False:
        verdict, found = "conjecture_holds", False
    elif start is None or center is None:
        verdict, found = "inconclusive", False
    else:
        verdict, found = "counterexample", True
    values = {
        "d1_at_zero": rep.d1_at_zero,
        "d2_at_zero": rep.d2_at_zero,
        "d1_at_half": rep.d1_at_half,
        "d2_at_half": rep.d2_at_half,
    }
    return ConjectureVerdict(verdict, found, tau, values, tuple(notes))


# ---------------------------------------------------------------------------
# minimizing split

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(fn, a: float, b: float, width: float) -> list[tuple[float, float]]:
    """Golden-section search on [a, b]; returns every (x, f(x)) evaluated."""
    seen = []
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    seen += [(c, fc), (d, fd)]
    while b - a > width:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
            seen.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
            seen.append((d, fd))
    return seen


class MinSplit(NamedTuple):
    q_star: float
    f_star: float
    f_at_zero: float
    f_at_half: float
    err_bound: float
    grid_q: np.ndarray
    grid_f: np.ndarray


def find_min_split(
    spec: ChannelSpec,
    grid_points: int = 21,
    quad: QuadratureSpec | None = None,
    *,
    refine_width: float = 1e-4,
    backend=None,
) -> MinSplit:
    """Minimize f(q1, P - q1) over q1 in [0, P/2].

    A uniform grid locates the best cell, then golden-section search over
    the neighbouring grid cells narrows it to ``refine_width * P``.
    """
    spec.require_timo()
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")
    P = spec.power_P
    errs = [0.0]

    def f(q1: float) -> float:
        est = outage_timo(PowerSplit.on_line(q1, P), spec, quad, backend=backend)
        errs[0] = max(errs[0], est.stderr)
        return est.p_hat

    grid_q = np.linspace(0.0, P / 2, grid_points)
    grid_q[-1] = P / 2
    grid_f = np.array([f(q) for q in grid_q])
    i = int(np.argmin(grid_f))
    lo = grid_q[max(i - 1, 0)]
    hi = grid_q[min(i + 1, grid_points - 1)]
    candidates = list(zip(grid_q.tolist(), grid_f.tolist()))
    candidates += _golden(f, lo, hi, refine_width * P)
    q_star, f_star = min(candidates, key=lambda c: (c[1], c[0]))
    return MinSplit(float(q_star), float(f_star), float(grid_f[0]), float(grid_f[-1]), errs[0], grid_q, grid_f)


def fd_total_derivatives(
    q1: float,
    spec: ChannelSpec,
    quad: QuadratureSpec | None = None,
    *,
    h1: float = 1e-4,
    h2: float = 1e-3,
    backend=None,
) -> tuple[float, float]:
    """Finite-difference estimates of d/dq1 and d2/dq1^2 of f(q1, P - q1).

    Central differences in the interior; second-order one-sided stencils
    when q1 is closer than the step to 0 or P.
    """
    spec.require_timo()
    P = spec.power_P
    quad = quad or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=4000)

    def f(x):
        return outage_value(min(max(x, 0.0), P), spec, quad, backend=backend)

    def first(h):
        if q1 - h >= 0 and q1 + h <= P:
            return (f(q1 + h) - f(q1 - h)) / (2 * h)
        s = 1.0 if q1 - h < 0 else -1.0
        return s * (-3 * f(q1) + 4 * f(q1 + s * h) - f(q1 + 2 * s * h)) / (2 * h)

    def second(h):
        if q1 - h >= 0 and q1 + h <= P:
            return (f(q1 + h) - 2 * f(q1) + f(q1 - h)) / h**2
        s = 1.0 if q1 - h < 0 else -1.0
        return (2 * f(q1) - 5 * f(q1 + s * h) + 4 * f(q1 + 2 * s * h) - f(q1 + 3 * s * h)) / h**2

    return first(h1), second(h2)
