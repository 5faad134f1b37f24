"""Grid sweeps over (R, P) that classify each cell by where the outage
minimizer sits along q1 + q2 = P."""

from __future__ import annotations

import math
import multiprocessing as mp
import sys
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import ndimage

from .core import ChannelSpec, PowerSplit
from .results import make_row
from .specfun import ConvergenceError, QuadratureSpec
from .timo import find_min_split, outage_timo

VERDICTS = ("conjecture_holds", "counterexample", "inconclusive", "numerically_unstable")
UNSTABLE_LEVEL = 1.0 - 1e-6
MARGIN_FACTOR = 10.0


def parse_range(text: str) -> tuple[float, float, float]:
    """'a:b:s' -> (a, b, s) with s > 0 and a <= b."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"range {text!r} must look like start:stop:step")
    try:
        a, b, s = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"range {text!r} has a non-numeric field") from None
    if not all(math.isfinite(x) for x in (a, b, s)):
        raise ValueError(f"range {text!r} must be finite")
    if s <= 0 or a > b:
        raise ValueError(f"range {text!r} needs step > 0 and start <= stop")
    return a, b, s


def range_values(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic progression, rounded to shed accumulation error."""
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


@dataclass(frozen=True)
class SweepGrid:
    """Ranges are multiples of r; ``q_step`` is a fraction of P."""

    r: int
    R_range: tuple
    P_range: tuple
    q_step: float = 0.025

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValueError("r must be a positive integer")
        for name in ("R_range", "P_range"):
            a, b, s = getattr(self, name)
            if s <= 0 or a > b or a <= 0:
                raise ValueError(f"{name} needs 0 < start <= stop and step > 0")
        if not 0 < self.q_step <= 0.5:
            raise ValueError("q_step must lie in (0, 0.5]")

    @property
    def R_values(self) -> list[float]:
        return [m * self.r for m in range_values(*self.R_range)]

    @property
    def P_values(self) -> list[float]:
        return [m * self.r for m in range_values(*self.P_range)]

    @property
    def grid_points(self) -> int:
        return max(3, int(math.ceil(0.5 / self.q_step - 1e-9)) + 1)

    def cells(self) -> list[tuple[float, float]]:
        return [(R, P) for R in self.R_values for P in self.P_values]


@dataclass(frozen=True)
class SweepRecord:
    r: int
    rate_R: float
    power_P: float
    q_star: float | None
    f_star: float | None
    f_at_zero: float | None
    f_at_half: float | None
    verdict: str
    err_bound: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def to_row(self) -> dict:
        q2 = None if self.q_star is None else self.power_P - self.q_star
        return make_row(
            method="quadrature", t=2, r=self.r, R=self.rate_R, P=self.power_P,
            q1=self.q_star, q2=q2, value=self.f_star, uncertainty=self.err_bound,
            n_samples=1, seed=self.seed, verdict=self.verdict, q_star=self.q_star,
            f_star=self.f_star, f_at_zero=self.f_at_zero, f_at_half=self.f_at_half,
        )

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        return cls(
            r=row["r"], rate_R=row["R"], power_P=row["P"], q_star=row["q_star"],
            f_star=row["f_star"], f_at_zero=row["f_at_zero"], f_at_half=row["f_at_half"],
            verdict=row["verdict"], err_bound=row["uncertainty"], seed=row["seed"],
        )


def classify(ms, P: float, q_step: float) -> str:
    """Verdict for one minimization result.

    A counterexample needs the minimizer more than half a grid step away
    from both 0 and P/2 and a gain over the better candidate larger than
    ten error bounds.  An interior minimizer with a smaller gain is
    inconclusive.
    """
    if np.all(ms.grid_f > UNSTABLE_LEVEL):
        return "numerically_unstable"
    best = min(ms.f_at_zero, ms.f_at_half)
    half_step = 0.5 * q_step * P
    interior = half_step < ms.q_star < P / 2 - half_step
    if not interior or ms.f_star >= best:
        return "conjecture_holds"
    if ms.f_star < best - MARGIN_FACTOR * ms.err_bound:
        return "counterexample"
    return "inconclusive"


def evaluate_cell(r: int, R: float, P: float, q_step: float, grid_points: int,
                  quad: QuadratureSpec | None = None, seed: int | None = None,
                  backend: str | None = None) -> SweepRecord:
    spec = ChannelSpec(2, r, R, P)
    try:
        ms = find_min_split(spec, grid_points, quad, backend=backend)
    except ConvergenceError as exc:
        print(f"warning: R={R!r} P={P!r}: {exc}", file=sys.stderr)
        return SweepRecord(r, R, P, None, None, None, None, "inconclusive", None, seed)
    return SweepRecord(r, R, P, ms.q_star, ms.f_star, ms.f_at_zero, ms.f_at_half,
                       classify(ms, P, q_step), ms.err_bound, seed)


def _cell_task(args):
    return evaluate_cell(*args)


def warm_up(backend: str | None = None) -> None:
    """Compile the quadrature kernels once so forked workers inherit them."""
    spec = ChannelSpec(2, 2, 1.0, 1.0)
    outage_timo(PowerSplit(0.4, 0.6), spec, backend=backend)


def run_sweep(
    grid: SweepGrid,
    quad: QuadratureSpec | None = None,
    *,
    jobs: int = 1,
    seed: int | None = None,
    backend: str | None = None,
    on_record: Callable[[SweepRecord], None] | None = None,
) -> list[SweepRecord]:
    """Evaluate every cell in (R, P) order.

    ``on_record`` is called with each record in output order as soon as it
    and all earlier cells are done, which lets callers stream results.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    tasks = [(grid.r, R, P, grid.q_step, grid.grid_points, quad, seed, backend) for R, P in grid.cells()]
    out: list[SweepRecord] = []

    def emit(rec):
        out.append(rec)
        if on_record is not None:
            on_record(rec)

    if jobs == 1 or len(tasks) <= 1:
        for task in tasks:
            emit(_cell_task(task))
        return out

    warm_up(backend)
    ctx = mp.get_context("fork")
    pool = ctx.Pool(jobs)
    try:
        for rec in pool.imap(_cell_task, tasks, chunksize=1):
            emit(rec)
        pool.close()
    except BaseException:
        pool.terminate()
        raise
    finally:
        pool.join()
    return out


def verdict_grid(records: Iterable[SweepRecord]) -> tuple[list[float], list[float], np.ndarray]:
    """Arrange records into an (R, P) array of verdict strings."""
    records = list(records)
    Rs = sorted({rec.rate_R for rec in records})
    Ps = sorted({rec.power_P for rec in records})
    grid = np.full((len(Rs), len(Ps)), "", dtype=object)
    iR = {v: i for i, v in enumerate(Rs)}
    iP = {v: i for i, v in enumerate(Ps)}
    for rec in records:
        grid[iR[rec.rate_R], iP[rec.power_P]] = rec.verdict
    return Rs, Ps, grid


def label_regions(records: Iterable[SweepRecord], verdict: str = "counterexample",
                  connectivity: int = 8) -> tuple[int, np.ndarray, list[float], list[float]]:
    """Connected regions of cells carrying ``verdict`` on the (R, P) grid.

    ``connectivity`` is 4 (edge neighbours) or 8 (edges and corners).
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    Rs, Ps, grid = verdict_grid(records)
    mask = grid == verdict
    structure = ndimage.generate_binary_structure(2, 2 if connectivity == 8 else 1)
    labels, count = ndimage.label(mask, structure=structure)
    return int(count), labels, Rs, Ps
