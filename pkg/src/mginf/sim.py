"""Monte Carlo oracle for the M/G/inf queue.

Randomness comes from :func:`mginf.rng.substream`, keyed by fixed-size work
blocks, so results depend only on the seed and never on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, RunawayCycleError
from .rng import substream
from .transient import QueueParams, pk_stationary, truncation_k

CYCLE_BLOCK = 4096
REPS_BLOCK = 16384
MAX_EVENTS = 10_000_000
_BUFFER = 4096


def _map_blocks(fn, args, workers):
    if workers is None or workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


# ---------------------------------------------------------------------------
# Q(t) replications


def _q_values(params, t, m, rng):
    """``m`` independent copies of Q(t): Poisson count, uniform epochs, services."""
    if t == 0:
        return np.zeros(m, dtype=np.int64)
    n = rng.poisson(params.lam * t, m)
    total = int(n.sum())
    arrivals = rng.random(total) * t
    services = np.atleast_1d(params.service.sample(rng, total)) if total else np.empty(0)
    owner = np.repeat(np.arange(m), n)
    alive = arrivals + services > t
    return np.bincount(owner[alive], minlength=m)


def q_at_time(params: QueueParams, t: float, rng) -> int:
    """One replication of the number in system at ``t`` (empty at 0)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return int(_q_values(params, float(t), 1, rng)[0])


def _reps_block(params, t, m, seed, stream, block):
    return _q_values(params, t, m, substream(seed, "replications", (stream, block)))


def simulate_q(params: QueueParams, t: float, reps: int, seed: int = 0, stream: int = 0, workers: int = 1):
    """``reps`` replications of Q(t) as an int array."""
    if reps < 1:
        raise DomainError("reps must be positive")
    blocks = range(math.ceil(reps / REPS_BLOCK))
    args = [(params, float(t), min(REPS_BLOCK, reps - b * REPS_BLOCK), seed, stream, b) for b in blocks]
    return np.concatenate(_map_blocks(_reps_block, args, workers))


@dataclass(frozen=True)
class EmpiricalLaw:
    t: float
    counts: np.ndarray
    reps: int

    @property
    def pmf(self):
        return self.counts / self.reps


def empirical_law(params: QueueParams, t: float, reps: int, seed: int = 0, stream: int = 0, workers: int = 1):
    """Histogram of Q(t) on ``0..K_max``; larger values fall in the last bin."""
    k_max = truncation_k(params.rho)
    q = np.minimum(simulate_q(params, t, reps, seed, stream, workers), k_max)
    return EmpiricalLaw(float(t), np.bincount(q, minlength=k_max + 1), reps)


def empirical_phi(params: QueueParams, t: float, reps: int, seed: int = 0, stream: int = 0, workers: int = 1):
    """Simulated ``sup_k |P_hat_k(t) - P_k|`` and its worst-case standard error."""
    if reps < 10_000:
        raise DomainError("empirical_phi needs at least 10^4 replications")
    law = empirical_law(params, t, reps, seed, stream, workers)
    ks = np.arange(len(law.counts))
    phi = float(np.max(np.abs(law.pmf - pk_stationary(params, ks))))
    return phi, math.sqrt(1.0 / (4.0 * reps))


def empirical_phi_curve(params: QueueParams, times, reps: int, seed: int = 0, workers: int = 1):
    """:func:`empirical_phi` at each time, one substream family per time index."""
    phis = np.array([empirical_phi(params, float(t), reps, seed, i, workers)[0]
                     for i, t in enumerate(np.asarray(times, dtype=float))])
    return phis, math.sqrt(1.0 / (4.0 * reps))


def poisson_gof(q_values, mean, max_bin=12, min_expected=5.0):
    """Chi-square test of integer samples against Poisson(``mean``).

    Cells are ``0..max_bin-1`` and ``>= max_bin``; trailing cells with small
    expected counts are pooled. Returns ``(statistic, pvalue)``.
    """
    q_values = np.asarray(q_values)
    n = len(q_values)
    obs = np.bincount(np.minimum(q_values, max_bin), minlength=max_bin + 1).astype(float)
    exp_p = stats.poisson.pmf(np.arange(max_bin), mean)
    exp_p = np.append(exp_p, stats.poisson.sf(max_bin - 1, mean))
    expected = exp_p * n
    # pool from the right until every cell has enough mass
    while len(expected) > 2 and expected[-1] < min_expected:
        expected[-2] += expected[-1]
        obs[-2] += obs[-1]
        expected, obs = expected[:-1], obs[:-1]
    res = stats.chisquare(obs, expected)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# Regeneration cycles


@dataclass(frozen=True)
class CycleSample:
    busy_len: float
    idle_len: float
    cycle_len: float


@dataclass(frozen=True)
class CycleSamples:
    """Columnar store of simulated cycles; indexing yields :class:`CycleSample`."""

    busy: np.ndarray
    idle: np.ndarray
    cycle: np.ndarray

    def __len__(self):
        return len(self.busy)

    def __getitem__(self, i):
        return CycleSample(float(self.busy[i]), float(self.idle[i]), float(self.cycle[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def _cycle_block(params, m, seed, block):
    rng = substream(seed, "cycles", block)
    svc = params.service
    scale = 1.0 / params.lam
    busy = np.empty(m)
    idle = np.empty(m)
    services = np.atleast_1d(svc.sample(rng, _BUFFER)).tolist()
    gaps = rng.exponential(scale, _BUFFER).tolist()
    si = gi = 0
    for i in range(m):
        if si == _BUFFER:
            services = np.atleast_1d(svc.sample(rng, _BUFFER)).tolist()
            si = 0
        end = services[si]
        si += 1
        clock = 0.0
        events = 1
        while True:
            if gi == _BUFFER:
                gaps = rng.exponential(scale, _BUFFER).tolist()
                gi = 0
            clock += gaps[gi]
            gi += 1
            if clock >= end:
                break
            # arrival during the busy period: the system empties only after
            # the latest departure epoch
            if si == _BUFFER:
                services = np.atleast_1d(svc.sample(rng, _BUFFER)).tolist()
                si = 0
            dep = clock + services[si]
            si += 1
            if dep > end:
                end = dep
            events += 1
            if events > MAX_EVENTS:
                raise RunawayCycleError(
                    f"busy period in block {block}, cycle {i} exceeded {MAX_EVENTS} events "
                    f"(lam*b={params.rho:.3g}, elapsed {clock:.6g})")
        busy[i] = end
        # the next arrival after the system empties ends the idle period
        idle[i] = clock - end
    return busy, idle


def run_cycles(params: QueueParams, n: int, seed: int = 0, workers: int = 1) -> CycleSamples:
    """Simulate ``n`` independent regeneration cycles (busy + idle)."""
    if n < 1:
        raise DomainError("number of cycles must be positive")
    blocks = range(math.ceil(n / CYCLE_BLOCK))
    args = [(params, min(CYCLE_BLOCK, n - b * CYCLE_BLOCK), seed, b) for b in blocks]
    parts = _map_blocks(_cycle_block, args, workers)
    busy = np.concatenate([p[0] for p in parts])
    idle = np.concatenate([p[1] for p in parts])
    return CycleSamples(busy, idle, busy + idle)


def ks_statistic(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup_x |F_n(x) - cdf(x)|``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise DomainError("ks_statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def mean_and_se(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))

