"""Uniform power patterns for t transmitters, their two-entry perturbations,
the Wishart eigenvalue density, and the reduced-determinant estimator for
power vectors with at most two entries off the common level.

For the special allocation (q0 on k-2 slots, qa and qb on two more) the
channel splits as H = [H1 | h_a h_b] and

    det(I + H Q H*) = prod(lambda') * ((1 + qa m_a)(1 + qb m_b) - qa qb |xi|^2)

where lambda' = 1 + q0 * eig(H1 H1*), m_a and m_b are lambda'-weighted
norms of the rotated columns and xi their weighted inner product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _mc_kernels as kern
from ._accel import resolve_backend
from .core import TRACE_SLACK, ChannelSpec, OutageEstimate
from .mcsim import (
    DEFAULT_MC_SAMPLES,
    RandomStream,
    chunk_sizes,
    channel_logdets,
    sample_channel,
)
from .specfun import complex_multivariate_log_gamma

__all__ = [
    "PowerVector",
    "SpecialQ",
    "EigenSample",
    "PatternVerdict",
    "uniform_power_vector",
    "perturb_prime",
    "perturb_double_prime",
    "lemma1_log_density",
    "wishart_log_density",
    "reduced_statistics",
    "reduced_determinant",
    "reduced_determinant_from_channel",
    "mc_outage_special_q",
    "default_eps",
    "theorem2_check",
]


@dataclass(frozen=True)
class PowerVector:
    """Diagonal power allocation for t transmitters."""

    q: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        if not q:
            raise ValueError("power vector must be non-empty")
        if any(not (x >= 0 and math.isfinite(x)) for x in q):
            raise ValueError(f"powers must be finite and non-negative, got {q}")
        object.__setattr__(self, "q", q)

    @property
    def t(self) -> int:
        return len(self.q)

    @property
    def total(self) -> float:
        return math.fsum(self.q)

    def as_array(self) -> np.ndarray:
        return np.array(self.q)

    def check(self, spec: ChannelSpec) -> None:
        if self.t != spec.t:
            raise ValueError(f"power vector has {self.t} entries, expected t={spec.t}")
        if abs(self.total - spec.power_P) > TRACE_SLACK:
            raise ValueError(f"powers sum to {self.total!r}, expected P={spec.power_P!r}")


def uniform_power_vector(k: int, t: int, P: float) -> PowerVector:
    """P/k on the first k slots and zero on the rest."""
    if not 1 <= k <= t:
        raise ValueError(f"need 1 <= k <= t, got k={k}, t={t}")
    if not P > 0:
        raise ValueError("P must be positive")
    return PowerVector((P / k,) * k + (0.0,) * (t - k))


def _check_base(base: PowerVector, k: int, eps: float) -> float:
    P = base.total
    level = P / k
    expected = uniform_power_vector(k, base.t, P).q
    if any(abs(a - b) > TRACE_SLACK for a, b in zip(base.q, expected)):
        raise ValueError(f"base is not the uniform pattern with k={k}")
    if not 0 <= eps < level:
        raise ValueError(f"eps must lie in [0, P/k) = [0, {level}), got {eps}")
    return level


def perturb_prime(base: PowerVector, k: int, eps: float) -> PowerVector:
    """Move ``eps`` from the first active slot to the first idle slot."""
    if k >= base.t:
        raise ValueError("no idle slot to move power into (k = t)")
    level = _check_base(base, k, eps)
    q = list(base.q)
    q[0] = level - eps
    q[k] = eps
    return PowerVector(tuple(q))


def perturb_double_prime(base: PowerVector, k: int, eps: float) -> PowerVector:
    """Move ``eps`` from the first active slot to the second."""
    if k < 2:
        raise ValueError("need two active slots (k >= 2)")
    level = _check_base(base, k, eps)
    q = list(base.q)
    q[0] = level - eps
    q[1] = level + eps
    return PowerVector(tuple(q))


# ---------------------------------------------------------------------------
# eigenvalue density


def _check_lambdas(lambdas, m: int, n: int) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float).ravel()
    if not 1 <= m <= n:
        raise ValueError(f"need n >= m >= 1, got m={m}, n={n}")
    if lam.size != m:
        raise ValueError(f"expected {m} eigenvalues, got {lam.size}")
    if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be positive and finite")
    if np.unique(lam).size != lam.size:
        raise ValueError("eigenvalues must be pairwise distinct")
    return lam


def lemma1_log_density(lambdas, m: int, n: int) -> float:
    """Log joint eigenvalue density of A*A, A an n x m complex Gaussian matrix
    with E|A_ij|^2 = 2.

    The density integrates to 1 over ordered eigenvalues (m! over the full
    orthant).
    """
    lam = _check_lambdas(lambdas, m, n)
    vdm = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            vdm += math.log(abs(lam[i] - lam[j]))
    return (
        -m * n * math.log(2.0)
        + m * (m - 1) * math.log(math.pi)
        - complex_multivariate_log_gamma(m, n)
        - complex_multivariate_log_gamma(m, m)
        - 0.5 * float(lam.sum())
        + (n - m) * float(np.log(lam).sum())
        + 2.0 * vdm
    )


def wishart_log_density(lambdas, m: int, n: int) -> float:
    """Same density for unit-variance entries (E|A_ij|^2 = 1), as produced by
    :func:`outage_lab.mcsim.sample_channel`."""
    lam = np.asarray(lambdas, dtype=float)
    return lemma1_log_density(2.0 * lam, m, n) + m * math.log(2.0)


# ---------------------------------------------------------------------------
# reduced determinant


@dataclass(frozen=True)
class SpecialQ:
    """q0 on k-2 slots, qa and qb on the next two, zero elsewhere."""

    q0: float
    qa: float
    qb: float
    k: int
    t: int

    def __post_init__(self):
        if not 2 <= self.k <= self.t:
            raise ValueError(f"need 2 <= k <= t, got k={self.k}, t={self.t}")
        if not (self.qa > 0 and self.qb > 0):
            raise ValueError("qa and qb must be positive")
        if self.k > 2 and not self.q0 > 0:
            raise ValueError("q0 must be positive when k > 2")
        if self.q0 < 0:
            raise ValueError("q0 must be non-negative")

    def vector(self) -> PowerVector:
        return PowerVector((self.q0,) * (self.k - 2) + (self.qa, self.qb) + (0.0,) * (self.t - self.k))

    @classmethod
    def uniform(cls, k: int, t: int, P: float) -> "SpecialQ":
        level = P / k
        return cls(level if k > 2 else 0.0, level, level, k, t)


@dataclass(frozen=True)
class EigenSample:
    """Eigenvalues of H1 H1* and the shifted values 1 + q0 * lambda."""

    lambdas: tuple
    lambdas_prime: tuple = field(default=())

    @classmethod
    def from_gram(cls, lambdas, q0: float) -> "EigenSample":
        lam = np.clip(np.asarray(lambdas, dtype=float), 0.0, None)
        return cls(tuple(lam.tolist()), tuple((1.0 + q0 * lam).tolist()))

    def __post_init__(self):
        if any(x < 0 for x in self.lambdas):
            raise ValueError("eigenvalues must be non-negative")
        if any(x < 1 for x in self.lambdas_prime):
            raise ValueError("shifted eigenvalues must be at least 1")


def reduced_statistics(lambdas_prime, ha, hb) -> tuple[float, float, float]:
    """(m_a, m_b, |xi_ab|^2) with weights 1/lambda'."""
    w = 1.0 / np.asarray(lambdas_prime, dtype=float)
    ha = np.asarray(ha)
    hb = np.asarray(hb)
    ma = float(np.sum(w * np.abs(ha) ** 2))
    mb = float(np.sum(w * np.abs(hb) ** 2))
    xi = complex(np.sum(w * ha.conj() * hb))
    return ma, mb, abs(xi) ** 2


def reduced_determinant(sample: EigenSample, qa: float, qb: float, m_a: float, m_b: float, xi_ab_sq: float) -> float:
    """det(I + H Q H*) from the eigenvalue sample and the weighted column statistics."""
    if m_a < 0 or m_b < 0 or xi_ab_sq < 0:
        raise ValueError("m_a, m_b and |xi|^2 must be non-negative")
    if xi_ab_sq > m_a * m_b * (1.0 + 1e-12) + 1e-300:
        raise ValueError(f"|xi|^2 = {xi_ab_sq!r} exceeds m_a*m_b = {m_a * m_b!r}")
    lead = math.prod(sample.lambdas_prime)
    return lead * ((1.0 + qa * m_a) * (1.0 + qb * m_b) - qa * qb * xi_ab_sq)


def reduced_determinant_from_channel(H: np.ndarray, sq: SpecialQ) -> float:
    """Evaluate the reduced determinant for one full channel draw (r x t).

    Uses the eigenbasis of H1 H1* explicitly, which makes it an oracle for
    the rotation argument that the estimator relies on.
    """
    H = np.asarray(H, dtype=complex)
    r = H.shape[0]
    k = sq.k
    H1 = H[:, : k - 2]
    if k > 2:
        lam, U = np.linalg.eigh(H1 @ H1.conj().T)
    else:
        lam, U = np.zeros(r), np.eye(r)
    sample = EigenSample.from_gram(lam, sq.q0)
    ha = U.conj().T @ H[:, k - 2]
    hb = U.conj().T @ H[:, k - 1]
    ma, mb, xi2 = reduced_statistics(sample.lambdas_prime, ha, hb)
    return reduced_determinant(sample, sq.qa, sq.qb, ma, mb, xi2)


def mc_outage_special_q(
    sq: SpecialQ,
    spec: ChannelSpec,
    n: int = DEFAULT_MC_SAMPLES,
    stream: RandomStream | None = None,
    *,
    backend: str | None = None,
) -> OutageEstimate:
    """Outage for a special allocation by sampling eigenvalues of H1 H1* and
    two fresh columns; the event is det < e^R."""
    if sq.t != spec.t:
        raise ValueError(f"allocation is for t={sq.t}, channel has t={spec.t}")
    sq.vector().check(spec)
    stream = stream or RandomStream(0)
    rng = stream.generator()
    numba = resolve_backend(backend) == "numba"
    r = spec.r
    hits = errors = 0
    for c in chunk_sizes(n):
        if sq.k > 2:
            H1 = sample_channel(r, sq.k - 2, rng, size=c)
            lam = np.linalg.eigvalsh(H1 @ np.conj(np.swapaxes(H1, 1, 2)))
            lam_prime = 1.0 + sq.q0 * np.clip(lam, 0.0, None)
        else:
            lam_prime = np.ones((c, r))
        h = sample_channel(r, 2, rng, size=c)
        ha = np.ascontiguousarray(h[:, :, 0])
        hb = np.ascontiguousarray(h[:, :, 1])
        if numba:
            ld = kern.special_q_logdets_numba(np.ascontiguousarray(lam_prime), ha, hb, sq.qa, sq.qb)
        else:
            ld = kern.special_q_logdets_numpy(lam_prime, ha, hb, sq.qa, sq.qb)
        bad = np.isnan(ld)
        errors += int(bad.sum())
        hits += int(np.count_nonzero(ld[~bad] < spec.rate_R))
    valid = n - errors
    if valid == 0:
        raise ArithmeticError("every draw gave a non-positive determinant")
    return OutageEstimate.from_counts(hits, valid, "mc_special_q", errors, stream.describe())


# ---------------------------------------------------------------------------
# paired test of the uniform patterns


@dataclass(frozen=True)
class PatternVerdict:
    """Paired-difference test of one uniform pattern.

    ``delta_prime`` moves eps to an idle slot, ``delta_double`` moves it
    between two active slots; either is ``None`` when the move does not
    exist.  ``second_order`` is delta_double / eps^2, an estimate of
    d2f/dqi^2 - d2f/dqi dqj at the pattern.  The two ``second_order_*``
    flags report whether that quantity is significantly positive or
    significantly negative, leaving the reader to pick the sign convention.
    """

    k: int
    t: int
    eps: float
    n: int
    verdict: str
    rejected: bool
    delta_prime: float | None
    stderr_prime: float | None
    delta_double: float | None
    stderr_double: float | None
    second_order: float | None
    second_order_positive: bool | None
    second_order_negative: bool | None
    n_errors: int
    meta: dict = field(default_factory=dict, compare=False)


def default_eps(k: int, P: float) -> float:
    return 0.025 * P / k


def _paired(diff_sum: int, diff_sq: int, n: int) -> tuple[float, float]:
    mean = diff_sum / n
    if n < 2:
        return mean, 0.0
    var = max(diff_sq - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def theorem2_check(
    k: int,
    spec: ChannelSpec,
    eps: float | None = None,
    n: int = DEFAULT_MC_SAMPLES,
    stream: RandomStream | None = None,
    *,
    z: float = 3.0,
    backend: str | None = None,
) -> PatternVerdict:
    """Test whether the uniform k-of-t pattern is beaten by a small transfer.

    All three allocations are evaluated on the same channel draws, so the
    differences are paired.  The pattern is ``rejected`` when a difference
    is below ``-z`` standard errors, ``inconclusive`` when every tested
    difference lies within ``z`` standard errors of zero, and
    ``not_rejected`` otherwise.
    """
    t = spec.t
    if not 1 <= k <= t:
        raise ValueError(f"need 1 <= k <= t, got k={k}, t={t}")
    P = spec.power_P
    eps = default_eps(k, P) if eps is None else float(eps)
    if not 0 <= eps <= 0.05 * P / k + 1e-15:
        raise ValueError(f"eps must lie in [0, 0.05 P/k] = [0, {0.05 * P / k}], got {eps}")
    base = uniform_power_vector(k, t, P)
    rows = [base.as_array()]
    has_prime = k < t
    has_double = k >= 2
    if has_prime:
        rows.append(perturb_prime(base, k, eps).as_array())
    if has_double:
        rows.append(perturb_double_prime(base, k, eps).as_array())
    qs = np.vstack(rows)

    stream = stream or RandomStream(0)
    rng = stream.generator()
    m = qs.shape[0]
    sums = np.zeros(m, dtype=np.int64)
    sqs = np.zeros(m, dtype=np.int64)
    used = errors = 0
    for c in chunk_sizes(n):
        H = sample_channel(spec.r, t, rng, size=c)
        ld = channel_logdets(H, qs, backend)
        bad = np.isnan(ld).any(axis=0)
        errors += int(bad.sum())
        ind = (ld[:, ~bad] < spec.rate_R).astype(np.int64)
        d = ind[1:] - ind[0]
        sums[1:] += d.sum(axis=1)
        sqs[1:] += (d * d).sum(axis=1)
        used += int((~bad).sum())
    if used == 0:
        raise ArithmeticError("every draw failed to factorize")

    deltas = {}
    idx = 1
    for name, present in (("prime", has_prime), ("double", has_double)):
        if present:
            deltas[name] = _paired(int(sums[idx]), int(sqs[idx]), used)
            idx += 1

    rejected = any(d < -z * se for d, se in deltas.values())
    if rejected:
        verdict = "rejected"
    elif all(abs(d) <= z * se for d, se in deltas.values()):
        verdict = "inconclusive"
    else:
        verdict = "not_rejected"

    dp = deltas.get("prime")
    dd = deltas.get("double")
    second = pos = neg = None
    if dd is not None and eps > 0:
        second = dd[0] / eps**2
        pos = dd[0] > z * dd[1]
        neg = dd[0] < -z * dd[1]
    meta = dict(stream.describe())
    meta["z"] = z
    return PatternVerdict(
        k=k, t=t, eps=eps, n=used, verdict=verdict, rejected=rejected,
        delta_prime=None if dp is None else dp[0],
        stderr_prime=None if dp is None else dp[1],
        delta_double=None if dd is None else dd[0],
        stderr_double=None if dd is None else dd[1],
        second_order=second, second_order_positive=pos, second_order_negative=neg,
        n_errors=errors, meta=meta,
    )
