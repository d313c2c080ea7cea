"""Lower-bound machinery built on the count of type-A cards in place.

The observable is A_t, the number of type-A cards sitting in their starting
positions after t steps.  Under the uniform law its distribution has an
exact inclusion-exclusion form; along the walk it stays large until most
type-A cards have been touched, which is a coupon-collector event.  The gap
between the walk's mass at a threshold and the uniform mass is a valid
lower bound on total-variation distance at that step.

Touch counting works in hand picks: each step draws two hands, so the step
at which the untouched pool first drops to K is the ceiling of half the
pick index of the decisive touch.

All Monte Carlo here draws from streams derived with :func:`stream_rng`;
walk trials are processed in fixed-size blocks, one stream per block, so
results are a deterministic function of (seed, trials, block_size) and
estimates at different checkpoint times reuse the same walks.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .chain_core import (
    BiasProfile,
    STREAM_TOUCH,
    STREAM_WALK,
    hands_from_uniforms,
    stream_rng,
)

DEFAULT_BLOCK_SIZE = 4096


def derangement_count(m: int) -> int:
    """Number of permutations of m items with no fixed point, exactly."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    prev2, prev = 1, 0  # d(0), d(1)
    if m == 0:
        return prev2
    for i in range(2, m + 1):
        prev2, prev = prev, (i - 1) * (prev + prev2)
    return prev


def uniform_fixed_pmf(n: int) -> np.ndarray:
    """P(exactly m type-A cards fixed) under uniform, for m = 0..n.

    Inclusion-exclusion over which of the first n labels are fixed inside a
    uniform permutation of 2n labels.  Computed with term-ratio recurrences
    so nothing overflows for large n; tiny masses underflow to zero.
    """
    if n < 1:
        raise ValueError("n must be positive")
    deck = 2 * n
    pmf = np.zeros(n + 1)
    lead = 1.0  # C(n, m) / falling(deck, m)
    for m in range(n + 1):
        term = 1.0
        total = 1.0
        for i in range(n - m):
            term *= -(n - m - i) / ((i + 1) * (deck - m - i))
            total += term
            if abs(term) < 1e-18 * abs(total):
                break
        pmf[m] = lead * total
        lead *= (n - m) / ((m + 1) * (deck - m))
    np.clip(pmf, 0.0, 1.0, out=pmf)
    return pmf


def uniform_fixed_mass(n: int, threshold: int) -> float:
    """P(at least ``threshold`` type-A cards fixed) under uniform."""
    if threshold <= 0:
        return 1.0
    if threshold > n:
        return 0.0
    return float(min(1.0, uniform_fixed_pmf(n)[threshold:].sum()))


def coupon_expectation(n: int, threshold: int, a: float) -> float:
    """Expected hand picks until at most ``threshold`` type-A cards are untouched."""
    if not 0 <= threshold <= n:
        raise ValueError("threshold must lie in [0, n]")
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    harm = sum(1.0 / j for j in range(threshold + 1, n + 1))
    return (2 * n / a) * harm


def coupon_variance_bound(n: int, a: float) -> float:
    """Upper bound on the variance of the touch-time pick count."""
    return (2 * n / a) ** 2 * (math.pi ** 2 / 6)


def sample_touch_picks(n: int, a: float, threshold: int, trials: int,
                       seed: int) -> np.ndarray:
    """Sample the pick index at which untouched type-A cards first reach threshold.

    Uses the exact law directly: the wait between untouched counts j and
    j - 1 is geometric with success probability j a / (2n), independently.
    """
    if not 0 <= threshold <= n:
        raise ValueError("threshold must lie in [0, n]")
    rng = stream_rng(seed, STREAM_TOUCH)
    stages = np.arange(threshold + 1, n + 1, dtype=np.float64)
    if stages.size == 0:
        return np.zeros(trials, dtype=np.int64)
    p = stages * a / (2 * n)
    waits = rng.geometric(p[None, :], size=(trials, stages.size))
    return waits.sum(axis=1, dtype=np.int64)


class WalkSimResult(NamedTuple):
    t_values: tuple[int, ...]
    counts: np.ndarray                 # (trials, len(t_values)) A_t samples
    touch_steps: np.ndarray | None     # (trials,) first step with untouched <= K
    touch_picks: np.ndarray | None     # (trials,) pick index of the decisive touch


def simulate_walks(profile: BiasProfile, t_values, trials: int, seed: int,
                   *, touch_threshold: int | None = None,
                   block_size: int = DEFAULT_BLOCK_SIZE) -> WalkSimResult:
    """Run walk trials, reading A_t at each checkpoint and touch times.

    Checkpoints share trajectories, so estimates across t_values are coupled
    through common random numbers.
    """
    n = profile.n
    deck = profile.deck_size
    ts = tuple(sorted({int(t) for t in t_values}))
    if any(t < 0 for t in ts):
        raise ValueError("checkpoint times must be nonnegative")
    if trials < 1:
        raise ValueError("trials must be positive")
    tt = touch_threshold
    if tt is not None and not 0 <= tt <= n:
        raise ValueError("touch_threshold must lie in [0, n]")
    t_max = ts[-1] if ts else 0
    col_of = {t: i for i, t in enumerate(ts)}
    counts = np.empty((trials, len(ts)), dtype=np.int16)
    touch_steps = np.full(trials, -1, dtype=np.int64) if tt is not None else None
    touch_picks = np.full(trials, -1, dtype=np.int64) if tt is not None else None
    if tt is not None:
        slack = coupon_expectation(n, tt, profile.a) if tt < n else 0.0
        step_cap = max(t_max, math.ceil(10 * slack) + 100)
    else:
        step_cap = t_max

    for start in range(0, trials, block_size):
        stop = min(start + block_size, trials)
        bsz = stop - start
        rng = stream_rng(seed, STREAM_WALK, start // block_size)
        rows = np.arange(bsz)
        pos = np.tile(np.arange(deck, dtype=np.int16), (bsz, 1))
        cnt = np.full(bsz, n, dtype=np.int16)
        if tt is not None:
            untouched = np.ones((bsz, n), dtype=bool)
            ucnt = np.full(bsz, n, dtype=np.int32)
            b_steps = np.full(bsz, -1, dtype=np.int64)
            b_picks = np.full(bsz, -1, dtype=np.int64)
            if tt >= n:
                b_steps[:] = 0
                b_picks[:] = 0
        if 0 in col_of:
            counts[start:stop, col_of[0]] = cnt
        s = 0
        while True:
            touching = tt is not None and (b_picks < 0).any()
            if s >= t_max and not touching:
                break
            if s >= step_cap:
                raise RuntimeError(f"touch tracking still open after {s} steps")
            s += 1
            u = rng.random((bsz, 2))
            right = hands_from_uniforms(profile, u[:, 0]).astype(np.int64)
            left = hands_from_uniforms(profile, u[:, 1]).astype(np.int64)
            p_r = pos[rows, right]
            p_l = pos[rows, left]
            is_ar = right < n
            is_al = left < n
            before = (((p_r == right) & is_ar).astype(np.int16)
                      + ((p_l == left) & is_al).astype(np.int16))
            after = (((p_l == right) & is_ar).astype(np.int16)
                     + ((p_r == left) & is_al).astype(np.int16))
            cnt += after - before
            pos[rows, right] = p_l
            pos[rows, left] = p_r
            if touching:
                for ordinal, hand in ((1, right), (2, left)):
                    fresh = is_ar if ordinal == 1 else is_al
                    fresh = fresh & untouched[rows, np.minimum(hand, n - 1)] & (hand < n)
                    idx = np.flatnonzero(fresh)
                    if idx.size == 0:
                        continue
                    untouched[idx, hand[idx]] = False
                    ucnt[idx] -= 1
                    hit = idx[(ucnt[idx] <= tt) & (b_picks[idx] < 0)]
                    if hit.size:
                        b_picks[hit] = 2 * (s - 1) + ordinal
                        b_steps[hit] = s
            if s in col_of:
                counts[start:stop, col_of[s]] = cnt
        if tt is not None:
            touch_steps[start:stop] = b_steps
            touch_picks[start:stop] = b_picks
    return WalkSimResult(ts, counts, touch_steps, touch_picks)


class FixedMassEstimate(NamedTuple):
    estimate: float
    stderr: float


def estimate_fixed_mass(profile: BiasProfile, t: int, threshold: int,
                        trials: int, seed: int) -> FixedMassEstimate:
    """Monte Carlo estimate of P(A_t >= threshold) along the walk."""
    result = simulate_walks(profile, [t], trials, seed)
    hits = result.counts[:, 0] >= threshold
    p = float(hits.mean())
    return FixedMassEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / trials))


class LowerBoundRow(NamedTuple):
    t: int
    threshold: int
    estimate: float
    stderr: float
    uniform_mass: float
    bound: float


def lower_bound_sweep(profile: BiasProfile, t_values, threshold: int,
                      trials: int, seed: int) -> list[LowerBoundRow]:
    """TV lower bounds |P(A_t >= K) - uniform mass| over coupled checkpoints."""
    result = simulate_walks(profile, t_values, trials, seed)
    um = uniform_fixed_mass(profile.n, threshold)
    rows = []
    for i, t in enumerate(result.t_values):
        p = float((result.counts[:, i] >= threshold).mean())
        se = math.sqrt(max(p * (1 - p), 0.0) / trials)
        rows.append(LowerBoundRow(t, threshold, p, se, um, abs(p - um)))
    return rows


def tv_lower_bound(profile: BiasProfile, t: int, threshold: int,
                   trials: int, seed: int) -> LowerBoundRow:
    """Single-checkpoint TV lower bound at step t."""
    return lower_bound_sweep(profile, [t], threshold, trials, seed)[0]


def suggested_threshold(n: int) -> int:
    """Default mass threshold: square root of the deck size, rounded up."""
    return max(1, math.ceil(math.sqrt(2 * n)))
