"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_backends.py [--repeat 5] [--n 200000]

Each case is run once untimed (JIT compilation) and then ``--repeat``
times; the table shows the median wall time per backend, the speedup and
the largest difference between the two results.
"""

from __future__ import annotations

import argparse
import math
import statistics
import time

import numpy as np

from outage_lab import _mc_kernels as mk
from outage_lab.core import ChannelSpec, PowerSplit
from outage_lab.mcsim import RandomStream, channel_logdets, sample_channel
from outage_lab.timo import outage_timo, partial_d2f_dq1dq2, partial_d2f_dq2dq2

SPEC = ChannelSpec(2, 2, math.log(3.0), 0.5)
SPLITS = [PowerSplit(q, 0.5 - q) for q in (0.02, 0.075, 0.15, 0.25, 0.4)]


def quadrature_value(backend, _data):
    return np.array([outage_timo(s, SPEC, backend=backend).p_hat for s in SPLITS])


def quadrature_second(backend, _data):
    return np.array([partial_d2f_dq2dq2(s, SPEC, backend=backend) + partial_d2f_dq1dq2(s, SPEC, backend=backend)
                     for s in SPLITS])


def direct_logdets(backend, data):
    return channel_logdets(data["H"], np.array([[0.1, 0.4], [0.25, 0.25], [0.5, 0.0]]), backend)


def reduced_hits(backend, data):
    fn = mk.reduced_hits_numba if backend == "numba" else mk.reduced_hits_numpy
    return np.array([fn(data["S"], data["T"], data["rho"], SPEC.threshold)])


def special_q(backend, data):
    lam, ha, hb = data["lam"], data["ha"], data["hb"]
    if backend == "numba":
        return mk.special_q_logdets_numba(lam, ha, hb, 0.2, 0.3)
    return mk.special_q_logdets_numpy(lam, ha, hb, 0.2, 0.3)


CASES = [
    ("quadrature f (5 splits)", quadrature_value),
    ("quadrature d2 partials (5 splits)", quadrature_second),
    ("direct log-det (3 powers)", direct_logdets),
    ("reduced event count", reduced_hits),
    ("special-q log-det (r=4)", special_q),
]


def make_data(n: int) -> dict:
    rng = RandomStream(2024).generator()
    H = sample_channel(2, 2, rng, size=n)
    h = sample_channel(4, 2, rng, size=n)
    return {
        "H": np.ascontiguousarray(H),
        "S": 0.1 * rng.standard_gamma(2, n),
        "T": 0.4 * rng.standard_gamma(2, n),
        "rho": rng.beta(1, 1, n),
        "lam": 1.0 + 0.5 * rng.standard_gamma(1, (n, 4)),
        "ha": np.ascontiguousarray(h[:, :, 0]),
        "hb": np.ascontiguousarray(h[:, :, 1]),
    }


def timed(fn, backend, data, repeat):
    out = fn(backend, data)  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend, data)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=200_000, help="draws for the Monte Carlo kernels")
    args = ap.parse_args(argv)

    data = make_data(args.n)
    print(f"{'case':36s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in CASES:
        t_nb, a = timed(fn, "numba", data, args.repeat)
        t_np, b = timed(fn, "numpy", data, args.repeat)
        diff = float(np.nanmax(np.abs(np.asarray(a, float) - np.asarray(b, float))))
        print(f"{name:36s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
