"""Seeded Monte Carlo estimators of the outage probability.

Two estimators are provided: direct sampling of the full channel matrix
for any (t, r, q), and the reduced S/T/rho sampler for two transmitters.
Draws are produced in fixed-size chunks so results do not depend on the
backend or on how the caller splits work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _mc_kernels as kern
from ._accel import resolve_backend
from .core import ChannelSpec, OutageEstimate, PowerSplit, as_power_vector

__all__ = [
    "CHUNK",
    "chunk_sizes",
    "DEFAULT_MC_SAMPLES",
    "RNG_NAME",
    "RandomStream",
    "as_generator",
    "sample_channel",
    "channel_logdets",
    "mc_outage_direct",
    "mc_outage_timo_reduced",
]

CHUNK = 1 << 16
DEFAULT_MC_SAMPLES = 10**6
RNG_NAME = "numpy PCG64, SeedSequence(seed, spawn_key=(stream_id,))"
_U64 = 1 << 64


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Every call to :meth:`generator` starts the stream from the beginning,
    so an estimator handed the same stream twice sees the same draws.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)

    def describe(self) -> dict:
        return {"rng": RNG_NAME, "seed": self.seed, "stream_id": self.stream_id}


def as_generator(stream) -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream).__name__}")


def sample_channel(rows: int, cols: int, stream, size: int | None = None) -> np.ndarray:
    """Circularly symmetric complex Gaussian matrix with E|H_ij|^2 = 1.

    Returns shape (rows, cols), or (size, rows, cols) when ``size`` is given.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = as_generator(stream)
    shape = (rows, cols, 2) if size is None else (size, rows, cols, 2)
    z = rng.standard_normal(shape)
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def chunk_sizes(n: int):
    if n < 1:
        raise ValueError("n must be positive")
    done = 0
    while done < n:
        c = min(CHUNK, n - done)
        yield c
        done += c


def channel_logdets(H: np.ndarray, qs: np.ndarray, backend: str | None = None) -> np.ndarray:
    """log det(I + H diag(q) H*) for each draw and each power row; NaN marks a failed factorization."""
    H = np.ascontiguousarray(H, dtype=np.complex128)
    qs = np.ascontiguousarray(np.atleast_2d(qs), dtype=float)
    if resolve_backend(backend) == "numba":
        return kern.logdets_numba(H, qs)
    return kern.logdets_numpy(H, qs)


def mc_outage_direct(
    q_diag,
    spec: ChannelSpec,
    n: int = DEFAULT_MC_SAMPLES,
    stream: RandomStream | None = None,
    *,
    backend: str | None = None,
) -> OutageEstimate:
    """Fraction of channel draws with log det(I + H Q H*) < R.

    Draws whose Cholesky factorization fails are counted in ``n_errors``
    and left out of the estimate.
    """
    q = as_power_vector(q_diag)
    if q.size != spec.t:
        raise ValueError(f"power vector has {q.size} entries, expected t={spec.t}")
    stream = stream or RandomStream(0)
    rng = stream.generator()
    qs = q[None, :]
    hits = errors = 0
    for c in chunk_sizes(n):
        H = sample_channel(spec.r, spec.t, rng, size=c)
        ld = channel_logdets(H, qs, backend)[0]
        bad = np.isnan(ld)
        errors += int(bad.sum())
        hits += int(np.count_nonzero(ld[~bad] < spec.rate_R))
    valid = n - errors
    if valid == 0:
        raise ArithmeticError("every draw failed to factorize")
    return OutageEstimate.from_counts(hits, valid, "mc_direct", errors, stream.describe())


def _reduced_draws(rng, split: PowerSplit, r: int, c: int):
    S = split.q1 * rng.standard_gamma(r, c)
    T = split.q2 * rng.standard_gamma(r, c)
    rho = rng.beta(r - 1, 1.0, c) if r > 1 else np.zeros(c)
    return S, T, rho


def mc_outage_timo_reduced(
    split: PowerSplit,
    spec: ChannelSpec,
    n: int = DEFAULT_MC_SAMPLES,
    stream: RandomStream | None = None,
    *,
    backend: str | None = None,
) -> OutageEstimate:
    """Fraction of draws with 1 + S + T + S T rho < e^R.

    S and T are Gamma(r) draws scaled by q1 and q2 (a zero power gives the
    constant 0); rho has density (r-1) rho^(r-2), and is 0 when r = 1.
    """
    spec.require_timo()
    stream = stream or RandomStream(0)
    rng = stream.generator()
    count = kern.reduced_hits_numba if resolve_backend(backend) == "numba" else kern.reduced_hits_numpy
    thr = spec.threshold
    hits = 0
    for c in chunk_sizes(n):
        S, T, rho = _reduced_draws(rng, split, spec.r, c)
        hits += int(count(S, T, rho, thr))
    return OutageEstimate.from_counts(hits, n, "mc_reduced", 0, stream.describe())
