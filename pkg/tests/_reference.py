"""Independent reference implementations used as test oracles.

Everything here is deliberately brute force: dense matrices, dictionary
dynamic programming over (permutation, marked set) states, and exhaustive
enumeration.  Slow but transparent, so the fast engines can be checked
against them.
"""
from __future__ import annotations

import copy
import itertools
from collections import defaultdict

import numpy as np

from biased_shuffle import make_bias_profile
from biased_shuffle.chain_core import MoveRecord
from biased_shuffle.marking import (
    MarkingState,
    build_assignment,
    mark_threshold,
    phase1_accept_probability,
    phase1_step,
    phase2_mixed_mark_probability,
    phase2_pair_accept_probability,
    phase2_solo_accept_probability,
)


def dense_transition_matrix(profile):
    """Row-stochastic matrix over all permutations in lexicographic order."""
    deck = profile.deck_size
    perms = list(itertools.permutations(range(deck)))
    index = {p: i for i, p in enumerate(perms)}
    size = len(perms)
    mat = np.zeros((size, size))
    probs = [profile.hand_probability(c) for c in range(deck)]
    for i, perm in enumerate(perms):
        for r in range(deck):
            for l in range(deck):
                lst = list(perm)
                pr, pl = lst.index(r), lst.index(l)
                lst[pr], lst[pl] = lst[pl], lst[pr]
                mat[i, index[tuple(lst)]] += probs[r] * probs[l]
    return mat, perms


def lex_rank(perm) -> int:
    """Rank of a permutation in lexicographic order, by counting."""
    remaining = sorted(perm)
    rank = 0
    for value in perm:
        pos = remaining.index(value)
        rank += pos * _factorial(len(remaining) - 1)
        remaining.remove(value)
    return rank


def _factorial(m: int) -> int:
    out = 1
    for i in range(2, m + 1):
        out *= i
    return out


def uniform_fixed_mass_enumerated(n: int, threshold: int) -> float:
    """P(at least threshold of the first n labels fixed), by enumeration."""
    deck = 2 * n
    hits = 0
    total = 0
    for perm in itertools.permutations(range(deck)):
        total += 1
        fixed = sum(1 for i in range(n) if perm[i] == i)
        if fixed >= threshold:
            hits += 1
    return hits / total


def full_scheme_dp(a: float, c1: float, deck: int = 4, tol: float = 1e-12):
    """Exact law of the deck at full marking, by DP over (perm, marked set).

    Returns dict mapping the final permutation tuple to its probability.
    Uses only the walk law and the marking rules, no phi/psi bookkeeping,
    so it is an independent check of the trajectory engines.
    """
    n = deck // 2
    profile = make_bias_profile(n, a)
    probs = [profile.hand_probability(c) for c in range(deck)]
    threshold = mark_threshold(deck, c1)
    cache: dict[frozenset, dict] = {}

    def pair_map(marked: frozenset) -> dict:
        if marked not in cache:
            flags = [c in marked for c in range(deck)]
            cache[marked] = build_assignment(n, flags).by_pair
        return cache[marked]

    dist = {(tuple(range(deck)), frozenset()): 1.0}
    absorbed: dict[tuple, float] = defaultdict(float)
    while sum(dist.values()) > tol:
        new = defaultdict(float)
        for (perm, marked), mass in dist.items():
            k = len(marked)
            phase2 = k >= threshold
            for r in range(deck):
                for l in range(deck):
                    m = mass * probs[r] * probs[l]
                    lst = list(perm)
                    pr, pl = lst.index(r), lst.index(l)
                    lst[pr], lst[pl] = lst[pl], lst[pr]
                    q = tuple(lst)
                    m_r, m_l = r in marked, l in marked

                    def put(marked2, weight):
                        if weight <= 0.0:
                            return
                        key = frozenset(marked2)
                        if len(key) == deck:
                            absorbed[q] += m * weight
                        else:
                            new[(q, key)] += m * weight

                    if not phase2:
                        if not m_r and not m_l:
                            acc = phase1_accept_probability(profile, r, l)
                            put(marked | {r}, acc)
                            put(marked, 1.0 - acc)
                        else:
                            put(marked, 1.0)
                    elif r == l:
                        if not m_r:
                            acc = phase2_solo_accept_probability(profile, r)
                            put(marked | {r}, acc)
                            put(marked, 1.0 - acc)
                        else:
                            put(marked, 1.0)
                    elif not m_r and m_l:
                        acc = phase2_mixed_mark_probability(profile, l)
                        put(marked | {r}, acc)
                        put((marked - {l}) | {r}, 1.0 - acc)
                    elif m_r and not m_l:
                        acc = phase2_mixed_mark_probability(profile, r)
                        put(marked | {l}, acc)
                        put((marked - {r}) | {l}, 1.0 - acc)
                    elif m_r and m_l:
                        u = pair_map(marked).get((r, l))
                        if u is not None:
                            acc = phase2_pair_accept_probability(profile, u, r, l)
                            put(marked | {u}, acc)
                            put(marked, 1.0 - acc)
                        else:
                            put(marked, 1.0)
                    else:
                        put(marked, 1.0)
        dist = new
    return dict(absorbed)


class _FixedCoin:
    """Stand-in rng whose random() returns a preset value."""

    def __init__(self, value: float):
        self.value = value

    def random(self) -> float:
        return self.value


def phase1_path_distribution(a: float, steps: int, deck: int = 4):
    """Exact joint law of (deck, marked, phi, psi, k) after phase-one steps.

    Enumerates every hand pair and coin branch with its probability, driving
    the real scalar engine, so the engine's phi/psi bookkeeping is exercised
    on every path.
    """
    n = deck // 2
    profile = make_bias_profile(n, a)
    probs = [profile.hand_probability(c) for c in range(deck)]
    dist: dict[tuple, float] = defaultdict(float)

    def rec(ms: MarkingState, depth: int, mass: float) -> None:
        if depth == steps:
            key = (tuple(ms.deck.card_at), tuple(sorted(
                c for c in range(deck) if ms.marked[c])),
                tuple(ms.phi), tuple(ms.psi), ms.k)
            dist[key] += mass
            return
        for r in range(deck):
            for l in range(deck):
                base = mass * probs[r] * probs[l]
                if not ms.marked[r] and not ms.marked[l]:
                    acc = phase1_accept_probability(profile, r, l)
                    branches = [(acc, 0.0), (1.0 - acc, 1.0 - 1e-12)]
                else:
                    branches = [(1.0, 0.5)]
                for weight, coin in branches:
                    if weight <= 0.0:
                        continue
                    child = copy.deepcopy(ms)
                    child.deck.swap_cards(r, l)
                    child.t += 1
                    phase1_step(child, MoveRecord(child.t, r, l),
                                _FixedCoin(coin))
                    rec(child, depth + 1, base * weight)

    # c1 close to one keeps every enumerated step inside phase one
    rec(MarkingState(profile, 1.0 - 1e-9), 0, 1.0)
    return dist
