"""Absorbing chain over (marked type-A count, marked type-B count).

During the second marking phase the pair (k_a, k_b) moves on a triangular
grid: a b-card gets marked, an a-card gets marked, or a mark migrates from a
b-card to an a-card.  The exact per-step probabilities of those moves depend
only on (n, a, k_a, k_b), which makes expected absorption times and bound
tables computable by one backward sweep.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .chain_core import stream_rng, STREAM_TYPECHAIN


class TypeCount(NamedTuple):
    """Counts of marked cards by type."""

    ka: int
    kb: int


class TransitionRow(NamedTuple):
    """One-step law of the type-count chain at a given state."""

    p_b_up: float   # (ka, kb) -> (ka, kb + 1)
    p_a_up: float   # (ka, kb) -> (ka + 1, kb)
    p_move: float   # (ka, kb) -> (ka + 1, kb - 1)
    p_stay: float


def _check_state(n: int, ka: int, kb: int) -> None:
    if n < 1:
        raise ValueError("n must be positive")
    if not (0 <= ka <= n and 0 <= kb <= n):
        raise ValueError(f"(ka, kb) = ({ka}, {kb}) outside the 0..{n} grid")


def _check_c1(c1: float) -> None:
    if not 0.5 < c1 < 1.0:
        raise ValueError("c1 must lie strictly between 1/2 and 1")


def transition_row(n: int, a: float, ka: int, kb: int) -> TransitionRow:
    """Exact move probabilities of the type-count chain at (ka, kb)."""
    _check_state(n, ka, kb)
    b = 2.0 - a
    denom = (2 * n) ** 2
    k1 = ka + kb + 1
    p_b_up = 2.0 * a * b * (n - kb) * k1 / denom
    p_a_up = 2.0 * a * a * (n - ka) * k1 / denom
    p_move = 2.0 * a * (b - a) * (n - ka) * kb / denom
    return TransitionRow(p_b_up=p_b_up, p_a_up=p_a_up, p_move=p_move,
                         p_stay=1.0 - p_b_up - p_a_up - p_move)


def rate_mark_a(n: int, a: float, ka: int, kb: int) -> float:
    """Per-step probability that the marked type-A count increases."""
    row = transition_row(n, a, ka, kb)
    return row.p_a_up + row.p_move


def rate_mark_a_floor(n: int, a: float, c1: float, ka: int) -> float:
    """Lower bound a (n - ka) (2 c1 - 1) / n, valid once ka + kb >= 2 n c1."""
    _check_c1(c1)
    return a * (n - ka) * (2.0 * c1 - 1.0) / n


def expected_absorption(n: int, a: float) -> np.ndarray:
    """Expected steps to reach (n, n) from every grid state, exact.

    Solved by one backward sweep over k = ka + kb (descending), with ka
    descending inside a diagonal so the mark-move target is always ready.
    """
    _check_state(n, 0, 0)
    table = np.zeros((n + 1, n + 1))
    for k in range(2 * n - 1, -1, -1):
        lo = max(0, k - n)
        for ka in range(min(n, k), lo - 1, -1):
            kb = k - ka
            row = transition_row(n, a, ka, kb)
            q = row.p_b_up + row.p_a_up + row.p_move
            acc = 1.0
            if row.p_b_up:
                acc += row.p_b_up * table[ka, kb + 1]
            if row.p_a_up:
                acc += row.p_a_up * table[ka + 1, kb]
            if row.p_move:
                acc += row.p_move * table[ka + 1, kb - 1]
            table[ka, kb] = acc / q
    return table


def absorption_bound_table(n: int, a: float) -> np.ndarray:
    """Normalised worst-case absorption recurrence on the type-count grid.

    The table solves the jump recurrence with weights b (n - kb) for a b-mark,
    a (n - ka) for an a-mark and (b - 1)(n - ka) for a mark move; the value at
    a state times n / (a (2 c1 - 1)) upper-bounds the true expected absorption
    time inside the k >= 2 n c1 regime.  On the kb = 0 boundary (outside that
    regime) the move term has no target and is dropped.
    """
    _check_state(n, 0, 0)
    b = 2.0 - a
    table = np.zeros((n + 1, n + 1))
    for k in range(2 * n - 1, -1, -1):
        lo = max(0, k - n)
        for ka in range(min(n, k), lo - 1, -1):
            kb = k - ka
            w_b = b * (n - kb)
            w_a = a * (n - ka)
            w_m = (b - 1.0) * (n - ka) if kb >= 1 else 0.0
            acc = 1.0
            if w_b:
                acc += w_b * table[ka, kb + 1]
            if w_a:
                acc += w_a * table[ka + 1, kb]
            if w_m:
                acc += w_m * table[ka + 1, kb - 1]
            table[ka, kb] = acc / (w_b + w_a + w_m)
    return table


def phase2_time_scale(n: int, a: float, c1: float) -> float:
    """Prefactor n / (a (2 c1 - 1)) restoring step units to the bound table."""
    _check_c1(c1)
    return n / (a * (2.0 * c1 - 1.0))


def harmonic_number(m: int) -> float:
    return sum(1.0 / i for i in range(1, m + 1))


def harmonic_probe(n: int, c1: float, a: float) -> dict:
    """Binomially weighted start average of the bound table vs a harmonic sum.

    Starts sit on the diagonal ka + kb = 2 n c1 with weights
    C(d, n - ka) 2^-d where d = 2 n (1 - c1) must be a small integer.  The
    probe only reports the comparison with H(d); nothing is asserted.
    """
    _check_c1(c1)
    d_real = 2 * n * (1.0 - c1)
    d = round(d_real)
    if abs(d_real - d) > 1e-9 or d < 1:
        raise ValueError("2 n (1 - c1) must be a positive integer for the probe")
    if d > n:
        raise ValueError("diagonal leaves the grid; pick c1 with 2n(1-c1) <= n")
    table = absorption_bound_table(n, a)
    k = 2 * n - d
    weighted = 0.0
    for ka in range(n - d, n + 1):
        kb = k - ka
        weighted += math.comb(d, n - ka) * 0.5 ** d * table[ka, kb]
    harmonic = harmonic_number(d)
    return {
        "n": n,
        "c1": c1,
        "a": a,
        "diagonal": d,
        "weighted_sum": float(weighted),
        "harmonic": harmonic,
        "ratio": float(weighted / harmonic),
    }


def variance_bound(n: int, a: float, c1: float) -> float:
    """Bound (pi^2 / 6) N^2 / (a^4 c1^2) on Var of the phase-two duration."""
    _check_c1(c1)
    deck = 2 * n
    return (math.pi ** 2 / 6.0) * deck * deck / (a ** 4 * c1 ** 2)


def phase2_upper_bound(n: int, a: float, c1: float, const_term: float = 4.0) -> float:
    """Bound (n / (a (2c1 - 1))) (log 2n + log log 2n + const) on the mean
    phase-two duration."""
    _check_c1(c1)
    deck = 2 * n
    if deck < 3:
        raise ValueError("bound needs 2n >= 3 for the log log term")
    return phase2_time_scale(n, a, c1) * (math.log(deck) + math.log(math.log(deck)) + const_term)


def simulate_absorption(n: int, a: float, start: TypeCount | tuple[int, int],
                        trials: int, seed: int) -> np.ndarray:
    """Monte Carlo absorption step counts via the jump chain.

    Sojourn lengths are geometric with the state's total move probability, so
    each trajectory needs at most 2n draws.  Deterministic for (seed, trials).
    """
    ka0, kb0 = start
    _check_state(n, ka0, kb0)
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = stream_rng(seed, STREAM_TYPECHAIN)
    b = 2.0 - a
    denom = float((2 * n) ** 2)
    ka = np.full(trials, ka0, dtype=np.int64)
    kb = np.full(trials, kb0, dtype=np.int64)
    steps = np.zeros(trials, dtype=np.int64)
    active = np.flatnonzero((ka < n) | (kb < n))
    while active.size:
        cka, ckb = ka[active], kb[active]
        k1 = cka + ckb + 1
        p_b = 2.0 * a * b * (n - ckb) * k1 / denom
        p_a = 2.0 * a * a * (n - cka) * k1 / denom
        p_m = 2.0 * a * (b - a) * (n - cka) * ckb / denom
        q = p_b + p_a + p_m
        steps[active] += rng.geometric(q)
        u = rng.random(active.size) * q
        go_b = u < p_b
        go_a = ~go_b & (u < p_b + p_a)
        go_m = ~go_b & ~go_a
        kb[active] += go_b.astype(np.int64) - go_m.astype(np.int64)
        ka[active] += (go_a | go_m).astype(np.int64)
        active = active[(ka[active] < n) | (kb[active] < n)]
    return steps
