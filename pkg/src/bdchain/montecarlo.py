"""Trajectory simulation under families of stopping rules.

Paths are simulated in contiguous blocks that can run on a thread pool; the
per-path outputs are stitched back in path order and the occupation
accumulators are integer sums, so every estimate is bit-identical for any
worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .analytics import Extended, OccupationProfile, UndeterminedTailError, limit_expectation
from .chain import ChainSpec, float_probs
from .kernels import simulate_block

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**8
Z95 = 1.96
_NO_UPPER = -1


@dataclass(frozen=True)
class StoppingRule:
    """Stop at absorption in 0, or earlier per ``kind``.

    ``truncation``: after ``m`` steps. ``interval-exit``: on first reaching
    ``b``. ``truncated-interval-exit``: whichever of the two comes first.
    """

    kind: str
    m: int | None = None
    b: int | None = None

    def __post_init__(self):
        if self.kind == "truncation":
            ok = self.m is not None and self.m >= 0 and self.b is None
        elif self.kind == "interval-exit":
            ok = self.b is not None and self.b >= 1 and self.m is None
        elif self.kind == "truncated-interval-exit":
            ok = self.m is not None and self.m >= 0 and self.b is not None and self.b >= 1
        else:
            raise ValueError(f"unknown stopping rule {self.kind!r}")
        if not ok:
            raise ValueError(f"bad parameters for {self.kind}: m={self.m}, b={self.b}")

    def label(self) -> str:
        parts = [f"m={self.m}"] if self.m is not None else []
        if self.b is not None:
            parts.append(f"b={self.b}")
        return f"{self.kind}({', '.join(parts)})"


def truncation(m: int) -> StoppingRule:
    return StoppingRule("truncation", m=m)


def interval_exit(b: int) -> StoppingRule:
    return StoppingRule("interval-exit", b=b)


def truncated_interval_exit(m: int, b: int) -> StoppingRule:
    return StoppingRule("truncated-interval-exit", m=m, b=b)


RULE_FAMILIES: dict[str, Callable[[int], StoppingRule]] = {
    "truncation": truncation,
    "interval-exit": interval_exit,
}


@dataclass
class PathRecord:
    stopping_time: int
    terminal_state: int
    right_steps: int
    left_steps: int
    visits: dict
    cap_hit: bool = False


@dataclass
class EstimateWithCI:
    mean: float
    half_width_95: float
    paths: int
    seed: int
    rule: StoppingRule
    cap_hits: int = 0


@dataclass
class OccupationEstimate:
    profile: OccupationProfile
    paths: int
    seed: int
    cap_hits: int = 0


@dataclass
class Sweep:
    estimates: list
    analytic_limit: Extended | None
    note: str = ""


def _limits(spec: ChainSpec, rule: StoppingRule, cap: int) -> tuple[int, int, int]:
    k = spec.k
    m_limit = rule.m if rule.m is not None else cap + 1
    if rule.b is not None and rule.b <= k:
        raise ValueError(f"upper level b={rule.b} must exceed the start state k={k}")
    max_state = k + m_limit if rule.b is None else rule.b
    if rule.m is not None:
        max_state = min(max_state, k + rule.m)
    upper = rule.b if rule.b is not None else _NO_UPPER
    return m_limit, upper, max_state


def _run(spec: ChainSpec, rule: StoppingRule, paths: int, seed: int, track: bool,
         workers: int, cap: int, first: int = 0):
    m_limit, upper, max_state = _limits(spec, rule, cap)
    _, right = float_probs(spec, max_state + 1)
    workers = max(1, int(workers))
    bounds = np.linspace(0, paths, workers + 1).astype(int)
    chunks = [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def job(chunk):
        start, count = chunk
        return simulate_block(right, spec.k, m_limit, upper, cap, seed, first + start, count, track)

    if len(chunks) == 1:
        results = [job(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, chunks))
    stop_time = np.concatenate([r[0] for r in results])
    terminal = np.concatenate([r[1] for r in results])
    rights = np.concatenate([r[2] for r in results])
    capped = np.concatenate([r[3] for r in results])
    occ_sum = sum(r[4] for r in results)
    occ_sq = sum(r[5] for r in results)
    return stop_time, terminal, rights, capped, occ_sum, occ_sq


def simulate_path(spec: ChainSpec, rule: StoppingRule, seed: int, path_index: int,
                  cap: int = DEFAULT_CAP) -> PathRecord:
    """One trajectory from ``X_0 = k``; reproducible from ``(seed, path_index)`` alone."""
    stop_time, terminal, rights, capped, occ_sum, _ = _run(spec, rule, 1, seed, True, 1, cap, first=path_index)
    t, r = int(stop_time[0]), int(rights[0])
    visits = {int(n): int(occ_sum[n]) for n in np.nonzero(occ_sum)[0]}
    return PathRecord(t, int(terminal[0]), r, t - r, visits, bool(capped[0]))


def _ci(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    if n < 2:
        return mean, math.nan
    return mean, Z95 * float(np.std(values, ddof=1)) / math.sqrt(n)


def estimate_expectation(spec: ChainSpec, rule: StoppingRule, paths: int, seed: int,
                         workers: int = 1, cap: int = DEFAULT_CAP) -> EstimateWithCI:
    """Sample mean of ``X_T`` with a normal-approximation 95% interval."""
    if paths < 2:
        raise ValueError("need at least 2 paths")
    _, terminal, _, capped, _, _ = _run(spec, rule, paths, seed, False, workers, cap)
    hits = int(capped.sum())
    if hits:
        log.warning("%d of %d paths hit the step cap and were excluded", hits, paths)
    kept = terminal[~capped].astype(np.float64)
    mean, hw = _ci(kept)
    return EstimateWithCI(mean, hw, len(kept), seed, rule, hits)


def estimate_occupation(spec: ChainSpec, rule: StoppingRule, paths: int, seed: int,
                        workers: int = 1, cap: int = DEFAULT_CAP) -> OccupationEstimate:
    """Per-state mean visit counts before the stopping time, with 95% half-widths.

    Capped paths are kept here (their visits up to the cap are real counts);
    ``cap_hits`` reports how many there were.
    """
    if paths < 2:
        raise ValueError("need at least 2 paths")
    _, _, _, capped, occ_sum, occ_sq = _run(spec, rule, paths, seed, True, workers, cap)
    hits = int(capped.sum())
    if hits:
        log.warning("%d of %d paths hit the step cap", hits, paths)
    values, half = {}, {}
    for n in range(1, len(occ_sum)):
        s, sq = int(occ_sum[n]), int(occ_sq[n])
        mean = s / paths
        var = max((sq - s * s / paths) / (paths - 1), 0.0)
        values[n] = mean
        half[n] = Z95 * math.sqrt(var / paths)
    return OccupationEstimate(OccupationProfile(spec.k, values, rule, half), paths, seed, hits)


def convergence_sweep(spec: ChainSpec, family, grid: Sequence[int], paths: int, seed: int,
                      workers: int = 1, cap: int = DEFAULT_CAP) -> Sweep:
    """One estimate per index in ``grid`` (same seed throughout), plus the analytic limit."""
    grid = list(grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    make = RULE_FAMILIES[family] if isinstance(family, str) else family
    estimates = [estimate_expectation(spec, make(m), paths, seed, workers, cap) for m in grid]
    note = ""
    try:
        limit = limit_expectation(spec)
    except (UndeterminedTailError, ValueError) as exc:
        limit, note = None, str(exc)
    return Sweep(estimates, limit, note)
