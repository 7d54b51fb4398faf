"""Monte Carlo simulation of the walk.

Sampling loops are compiled with numba. Work is cut into a fixed number
of streams, each seeded from ``SeedSequence(seed).spawn``, so results
depend only on the seed and never on how many threads ran them.
``LRW_THREADS`` caps the thread pool.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from lrw.model import ValidatedModel

N_STREAMS = 16
TRACK = 10_000
DEFAULT_CAP = 10**8

TAU, ASCENT, RETURN = 0, 1, 2


def _cumulative_table(model: ValidatedModel) -> np.ndarray:
    """Row r holds cumulative (p, p+q1, ..., 1) for state r (r = K+1 is the tail)."""
    K, L = model.cutoff, model.L
    cum = np.zeros((K + 2, L + 1))
    for r in range(1, K + 2):
        row = model.row(r)
        cum[r] = np.cumsum((row.p, *row.q))
        cum[r, L] = 1.0
    return cum


@numba.njit(cache=True, nogil=True)
def _step(x, cum, K):
    if x == 0:
        return 1
    r = x if x <= K else K + 1
    u = np.random.random()
    if u < cum[r, 0]:
        return x + 1
    j = 1
    while u >= cum[r, j]:
        j += 1
    y = x - j
    return y if y > 0 else 0


@numba.njit(cache=True, nogil=True)
def _chain_kernel(seed, steps, cum, K, track, n_probe):
    np.random.seed(seed)
    occ = np.zeros(track + 1, np.int64)
    theta = np.zeros(track + 1, np.int64)
    last = np.full(n_probe, -1, np.int64)
    rsum = np.zeros(n_probe)
    rsq = np.zeros(n_probe)
    rcount = np.zeros(n_probe, np.int64)
    x = 0
    level = 0
    n0 = 0
    last[0] = 0
    theta[1] += 1
    for n in range(1, steps + 1):
        x = _step(x, cum, K)
        if x > level:
            level = x
        occ[x if x < track else track] += 1
        if x == 0:
            n0 += 1
            theta[level + 1 if level + 1 < track else track] += 1
        if x < n_probe:
            if last[x] >= 0:
                gap = n - last[x]
                rsum[x] += gap
                rsq[x] += gap * gap
                rcount[x] += 1
            last[x] = n
    return occ, theta, n0, rsum, rsq, rcount, level


@numba.njit(cache=True, nogil=True)
def _passage_kernel(seed, count, cum, K, start, kind, cap):
    np.random.seed(seed)
    out = np.empty(count, np.int64)
    for s in range(count):
        x = start
        t = 0
        done = False
        while t < cap:
            x = _step(x, cum, K)
            t += 1
            if kind == 0 and x < start:
                done = True
            elif kind == 1 and x == start + 1:
                done = True
            elif kind == 2 and x == start:
                done = True
            if done:
                break
        out[s] = t if done else -1
    return out


@numba.njit(cache=True, nogil=True)
def _theta_kernel(seed, count, cum, K, top):
    np.random.seed(seed)
    out = np.zeros((count, top), np.int64)
    for s in range(count):
        x = 0
        level = 0
        out[s, 0] = 1
        while level < top:
            x = _step(x, cum, K)
            if x > level:
                level = x
            if x == 0:
                out[s, level] += 1
    return out


def _stream_seeds(seed: int, n: int = N_STREAMS) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def _threads() -> int:
    raw = os.environ.get("LRW_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


def _run_streams(fn, seed: int, total: int) -> list:
    seeds = _stream_seeds(seed)
    sizes = _split(total, len(seeds))
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(fn, seeds, sizes))


@dataclass
class SimStats:
    """One trajectory from 0.

    ``occupation[k]`` is the fraction of steps 1..steps spent at k (the
    last entry lumps states >= the tracking cap). ``theta_counts[i]`` is
    the number of times at 0 between first hitting i-1 and first hitting
    i; entries at or above ``max_level + 1`` are incomplete pieces.
    """

    steps: int
    seed: int
    occupation: np.ndarray
    return_times: dict[int, dict]
    n0_count: int
    theta_counts: np.ndarray
    max_level: int

    def to_dict(self) -> dict:
        top = int(np.max(np.nonzero(self.occupation)[0])) + 1 if self.occupation.any() else 0
        return {
            "steps": self.steps,
            "seed": self.seed,
            "occupation": [float(x) for x in self.occupation[:top]],
            "return_times": {str(k): v for k, v in self.return_times.items()},
            "n0_count": self.n0_count,
            "theta_counts": [int(x) for x in self.theta_counts[1 : self.max_level + 1]],
            "max_level": self.max_level,
        }


def simulate(
    model: ValidatedModel, steps: int, seed: int, n_probe: int = 5, track: int = TRACK
) -> SimStats:
    """Run one trajectory of ``steps`` steps from state 0."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cum = _cumulative_table(model)
    occ, theta, n0, rsum, rsq, rcount, level = _chain_kernel(
        _stream_seeds(seed, 1)[0], steps, cum, model.cutoff, track, n_probe
    )
    returns = {}
    for k in range(n_probe):
        c = int(rcount[k])
        if c == 0:
            returns[k] = {"count": 0, "mean": None, "var": None, "censored": True}
            continue
        mean = rsum[k] / c
        var = max(rsq[k] / c - mean * mean, 0.0) * c / max(c - 1, 1)
        returns[k] = {"count": c, "mean": mean, "var": var, "censored": False}
    return SimStats(
        steps=steps,
        seed=seed,
        occupation=occ / steps,
        return_times=returns,
        n0_count=int(n0),
        theta_counts=theta[: min(level + 2, track + 1)],
        max_level=int(level),
    )


@dataclass(frozen=True)
class SampleMean:
    mean: float
    std_err: float
    n: int
    censored: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_err


def _summarize(samples: np.ndarray) -> SampleMean:
    good = samples[samples >= 0].astype(float)
    n = good.size
    if n < 2:
        return SampleMean(math.nan, math.nan, n, int(samples.size - n))
    return SampleMean(
        float(good.mean()), float(good.std(ddof=1) / math.sqrt(n)), n, int(samples.size - n)
    )


def sample_passage(
    model: ValidatedModel,
    start: int,
    kind: int,
    n: int,
    seed: int,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """``n`` first-passage times from ``start``; -1 marks a censored sample.

    ``kind`` is ``TAU`` (first time below start), ``ASCENT`` (first time at
    start+1) or ``RETURN`` (first return to start).
    """
    cum = _cumulative_table(model)
    K = model.cutoff

    def run(s, size):
        return _passage_kernel(s, size, cum, K, start, kind, cap)

    return np.concatenate(_run_streams(run, seed, n))


def mean_passage(model, start, kind, n, seed, cap=DEFAULT_CAP) -> SampleMean:
    return _summarize(sample_passage(model, start, kind, n, seed, cap))


def sample_theta(model: ValidatedModel, top: int, n: int, seed: int) -> np.ndarray:
    """``n`` independent climbs from 0 to ``top``; column i-1 holds theta_i."""
    cum = _cumulative_table(model)
    K = model.cutoff

    def run(s, size):
        return _theta_kernel(s, size, cum, K, top)

    return np.concatenate(_run_streams(run, seed, n), axis=0)
