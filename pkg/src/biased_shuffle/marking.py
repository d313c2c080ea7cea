"""Two-phase card marking scheme driven by the biased transposition walk.

The scheme watches the walk and marks cards so that, at the step when every
card is marked, the deck is exactly uniform.  Phase one (fewer than
ceil(c1 N) marks) marks the right-hand card of a both-unmarked draw with
probability a^2 / (w(R) w(L)).  Phase two marks through four triggers:

  1. both hands on the same unmarked u: mark u with probability a / w(u);
  2. right hand on unmarked u, left on a marked card: mark u with
     probability a / w(L), otherwise move the mark from L to u;
  3. the mirror image of 2;
  4. hands on the ordered pair assigned to an unmarked u: mark u with
     probability a w(u) / (w(R) w(L)).

Every unmarked card carries an assigned ordered pair of distinct marked
cards, at least one of the pair sharing its type; assignments are rebuilt
from scratch whenever the marked set changes.

Internally the deck permutation is factored as pi_t = phi_t o psi_t^{-1}:
``phi`` lists the marked cards first in marking order, ``psi`` lists their
positions slot for slot.  The identity is maintained incrementally and can
be checked exactly at any step with :func:`factorization_check`.

Two engines share the same law: a scalar per-trajectory engine carrying the
full factorization state, and a batched numpy engine used for large Monte
Carlo runs (it skips phi/psi, which only matter for the exactness checks).
The batched engine draws from a single stream derived from (seed, tag), so
its output is a deterministic function of (seed, trials).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import type_chain
from .chain_core import (
    BiasProfile,
    DeckState,
    MoveRecord,
    STREAM_MARKING,
    STREAM_UNIFORMITY,
    hands_from_uniforms,
    sample_hand,
    stream_rng,
)
from .exact_analysis import encode_many, factorials


def mark_threshold(deck: int, c1: float) -> int:
    """First marked count that belongs to phase two: ceil(c1 * deck)."""
    if not 0.5 < c1 < 1.0:
        raise ValueError("c1 must lie strictly between 1/2 and 1")
    return math.ceil(c1 * deck - 1e-9)


def phase1_accept_probability(profile: BiasProfile, right: int, left: int) -> float:
    a = profile.a
    return a * a / (profile.weight(right) * profile.weight(left))


def phase2_solo_accept_probability(profile: BiasProfile, card: int) -> float:
    return profile.a / profile.weight(card)


def phase2_mixed_mark_probability(profile: BiasProfile, marked_card: int) -> float:
    """Case 2/3 marking probability; the mark moves with the complement."""
    return profile.a / profile.weight(marked_card)


def phase2_pair_accept_probability(profile: BiasProfile, u: int, r: int, l: int) -> float:
    return profile.a * profile.weight(u) / (profile.weight(r) * profile.weight(l))


def phase1_marking_rate(profile: BiasProfile, k: int) -> float:
    """Per-step marking probability in phase one with k cards marked."""
    deck = profile.deck_size
    if not 0 <= k <= deck:
        raise ValueError("k out of range")
    return (profile.a * (deck - k) / deck) ** 2


@dataclass
class PairAssignment:
    """Injective map from unmarked cards to ordered pairs of marked cards."""

    pairs: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def by_pair(self) -> dict[tuple[int, int], int]:
        return {pair: u for u, pair in self.pairs.items()}


def build_assignment(n: int, marked: list[bool]) -> PairAssignment:
    """Greedy pair assignment for the current marked set.

    Unmarked cards are visited in ascending label order; each takes the
    lowest-labelled marked card of its own type as first coordinate and the
    lowest-labelled other marked card making an unused ordered pair as
    second.  Feasible whenever more than half the deck is marked.
    """
    deck = len(marked)
    if deck != 2 * n:
        raise ValueError("marked must have one flag per card")
    marked_all = [c for c in range(deck) if marked[c]]
    out = PairAssignment()
    used: set[tuple[int, int]] = set()
    for u in range(deck):
        if marked[u]:
            continue
        same_type = [c for c in marked_all if (c < n) == (u < n)]
        if not same_type:
            raise ValueError("no marked card shares the unmarked card's type")
        chosen = None
        for r in same_type:
            for l in marked_all:
                if l != r and (r, l) not in used:
                    chosen = (r, l)
                    break
            if chosen:
                break
        if chosen is None:
            raise ValueError("ran out of ordered pairs; marked set too small")
        used.add(chosen)
        out.pairs[u] = chosen
    return out


class MarkingState:
    """Scalar state of one marking trajectory.

    Tracks the deck, the marked set with per-type counts, the phi/psi
    factorization and the pair assignment.  Confined to a single trajectory;
    not thread safe.
    """

    def __init__(self, profile: BiasProfile, c1: float, always_mark: bool = False):
        deck = profile.deck_size
        self.profile = profile
        self.c1 = c1
        self.threshold = mark_threshold(deck, c1)
        self.always_mark = always_mark
        self.deck = DeckState(profile.n)
        self.marked = [False] * deck
        self.k = 0
        self.ka = 0
        self.kb = 0
        self.t = 0
        self.phi = list(range(deck))
        self.phi_inv = list(range(deck))
        self.psi = list(range(deck))
        self.phase2 = False
        self.assignment = PairAssignment()
        self.pair_to_u: dict[tuple[int, int], int] = {}
        # mark_times[k] is the step at which the marked count first hit k.
        self.mark_times: list[int | None] = [0] + [None] * deck

    @property
    def mark_order(self) -> list[int]:
        return self.phi[: self.k]

    @property
    def done(self) -> bool:
        return self.k == self.profile.deck_size

    def _accept(self, p: float, rng: np.random.Generator) -> bool:
        if p > 1.0 + 1e-12:
            raise AssertionError(f"acceptance probability {p} above one")
        return True if self.always_mark else rng.random() < p

    def _psi_swap(self, i: int, j: int) -> None:
        psi = self.psi
        psi[i], psi[j] = psi[j], psi[i]

    def _phi_swap(self, i: int, j: int) -> None:
        phi, inv = self.phi, self.phi_inv
        phi[i], phi[j] = phi[j], phi[i]
        inv[phi[i]] = i
        inv[phi[j]] = j

    def _both_swap(self, i: int, j: int) -> None:
        self._phi_swap(i, j)
        self._psi_swap(i, j)

    def apply_walk_move(self, rng: np.random.Generator) -> MoveRecord:
        """Sample hands, apply the swap to the deck, advance the clock."""
        right = sample_hand(self.profile, rng)
        left = sample_hand(self.profile, rng)
        self.deck.swap_cards(right, left)
        self.t += 1
        return MoveRecord(t=self.t, right=right, left=left)

    def _record_mark(self, card: int) -> None:
        self.marked[card] = True
        self.k += 1
        if card < self.profile.n:
            self.ka += 1
        else:
            self.kb += 1
        self.mark_times[self.k] = self.t

    def _rebuild_assignment(self) -> None:
        if self.done:
            self.assignment = PairAssignment()
        else:
            self.assignment = build_assignment(self.profile.n, self.marked)
        self.pair_to_u = self.assignment.by_pair

    def _enter_phase2_if_due(self) -> None:
        if not self.phase2 and self.k >= self.threshold:
            self.phase2 = True
            self._rebuild_assignment()

    # -- phase two bookkeeping helpers ------------------------------------

    def _move_update(self, right: int, left: int) -> None:
        """Fold an applied deck move into psi (phi untouched)."""
        if right != left:
            self._psi_swap(self.phi_inv[right], self.phi_inv[left])

    def _mark_phase2(self, right: int, left: int, new_card: int) -> None:
        self._move_update(right, left)
        slot = self.k
        self._both_swap(slot, self.phi_inv[new_card])
        self._record_mark(new_card)
        self._rebuild_assignment()

    def _move_mark(self, right: int, left: int, src: int, dst: int) -> None:
        self._move_update(right, left)
        self._both_swap(self.phi_inv[src], self.phi_inv[dst])
        self.marked[src] = False
        self.marked[dst] = True
        n = self.profile.n
        self.ka += int(dst < n) - int(src < n)
        self.kb += int(dst >= n) - int(src >= n)
        self._rebuild_assignment()


def phase1_step(ms: MarkingState, move: MoveRecord, rng: np.random.Generator) -> None:
    """Marking decision for an applied move while in phase one."""
    right, left = move.right, move.left
    profile = ms.profile
    if (not ms.marked[right] and not ms.marked[left]
            and ms._accept(phase1_accept_probability(profile, right, left), rng)):
        slot = ms.k
        r_slot = ms.phi_inv[right]
        l_slot = ms.phi_inv[left]
        ms._psi_swap(slot, l_slot)
        if r_slot == slot or l_slot == slot or r_slot == l_slot:
            ms._phi_swap(slot, r_slot)
        else:
            ms._phi_swap(slot, r_slot)
            ms._phi_swap(r_slot, l_slot)
        ms._record_mark(right)
    else:
        ms._move_update(right, left)
    ms._enter_phase2_if_due()


def phase2_step(ms: MarkingState, move: MoveRecord, rng: np.random.Generator) -> None:
    """Marking decision for an applied move while in phase two."""
    right, left = move.right, move.left
    profile = ms.profile
    m_right, m_left = ms.marked[right], ms.marked[left]
    if right == left:
        if not m_right and ms._accept(phase2_solo_accept_probability(profile, right), rng):
            ms._mark_phase2(right, left, right)
        return
    if not m_right and m_left:
        if ms._accept(phase2_mixed_mark_probability(profile, left), rng):
            ms._mark_phase2(right, left, right)
        else:
            ms._move_mark(right, left, src=left, dst=right)
        return
    if m_right and not m_left:
        if ms._accept(phase2_mixed_mark_probability(profile, right), rng):
            ms._mark_phase2(right, left, left)
        else:
            ms._move_mark(right, left, src=right, dst=left)
        return
    if m_right and m_left:
        u = ms.pair_to_u.get((right, left))
        if u is not None and ms._accept(
                phase2_pair_accept_probability(profile, u, right, left), rng):
            ms._mark_phase2(right, left, u)
        else:
            ms._move_update(right, left)
        return
    # both hands on distinct unmarked cards: phase two never marks here
    ms._move_update(right, left)


def factorization_check(ms: MarkingState) -> int:
    """Number of slots where the deck disagrees with phi o psi^{-1}.

    Zero means the factorization invariant holds exactly: the card at
    position psi[i] is phi[i] for every slot i.
    """
    card_at = ms.deck.card_at
    return sum(1 for i in range(ms.profile.deck_size)
               if card_at[ms.psi[i]] != ms.phi[i])


def default_step_cap(deck: int) -> int:
    return math.ceil(1e4 * deck * max(math.log(deck), 1.0))


@dataclass
class MarkingRunRecord:
    """Outcome of one trajectory run to full marking."""

    t_phase1: int
    t_full: int
    mark_times: list[int]
    deck: DeckState
    transitions: list[tuple[tuple[int, int], tuple[int, int]]] | None = None


def run_to_full_marking(profile: BiasProfile, c1: float, rng: np.random.Generator,
                        *, always_mark: bool = False,
                        check_each_step: bool = False,
                        record_transitions: bool = False,
                        step_cap: int | None = None) -> MarkingRunRecord:
    """Drive one trajectory until every card is marked."""
    ms = MarkingState(profile, c1, always_mark=always_mark)
    cap = default_step_cap(profile.deck_size) if step_cap is None else step_cap
    transitions: list | None = [] if record_transitions else None
    while not ms.done:
        move = ms.apply_walk_move(rng)
        pre_phase2 = ms.phase2
        pre = (ms.ka, ms.kb)
        if pre_phase2:
            phase2_step(ms, move, rng)
        else:
            phase1_step(ms, move, rng)
        if record_transitions and pre_phase2:
            transitions.append((pre, (ms.ka, ms.kb)))
        if check_each_step and factorization_check(ms) != 0:
            raise AssertionError(f"factorization broke at step {ms.t}")
        if ms.t > cap:
            raise RuntimeError(
                f"marking did not finish within {cap} steps "
                f"(k={ms.k}/{profile.deck_size}); check c1 and the profile")
    return MarkingRunRecord(
        t_phase1=int(ms.mark_times[ms.threshold]),
        t_full=int(ms.mark_times[profile.deck_size]),
        mark_times=[int(x) for x in ms.mark_times],
        deck=ms.deck,
        transitions=transitions,
    )


# --------------------------------------------------------------------------
# Batched engine
# --------------------------------------------------------------------------

B_UP, A_UP, MOVE, STAY = 0, 1, 2, 3


@dataclass
class MarkingCensus:
    """Per-cell step statistics accumulated across batched runs."""

    n: int
    phase1_steps: np.ndarray = None
    phase1_marks: np.ndarray = None
    phase2_counts: np.ndarray = None

    def __post_init__(self):
        cells = (self.n + 1) * (self.n + 1)
        if self.phase1_steps is None:
            self.phase1_steps = np.zeros(cells, dtype=np.int64)
        if self.phase1_marks is None:
            self.phase1_marks = np.zeros(cells, dtype=np.int64)
        if self.phase2_counts is None:
            self.phase2_counts = np.zeros((cells, 4), dtype=np.int64)

    def cell(self, ka: int, kb: int) -> int:
        return ka * (self.n + 1) + kb


@dataclass
class BulkMarkingResult:
    decks: np.ndarray          # (trials, N) final card_at rows
    t_phase1: np.ndarray       # (trials,)
    t_full: np.ndarray         # (trials,)
    mark_times: np.ndarray | None = None       # (trials, N + 1)
    hit_labels: np.ndarray | None = None       # (trials, m) sorted labels at k = m
    hit_positions: np.ndarray | None = None    # (trials, m) their positions


def _bulk_assignments(marked, ka, order, n, rows=None):
    """Vectorised greedy assignment; one row per run.

    Relies on type-A labels sorting below type-B labels, so the marked block
    of ``order`` lists marked A cards first.  Matches build_assignment.
    """
    deck = 2 * n
    count = marked.shape[0]
    low_a = order[:, 0]
    low_b = np.take_along_axis(order, ka[:, None].astype(np.int64), axis=1)[:, 0]
    cm = np.cumsum(marked, axis=1)
    labels = np.arange(deck, dtype=np.int64)
    rank_a = (labels[:n] + 1)[None, :] - cm[:, :n]
    rank_b = (labels[:n] + 1)[None, :] - (cm[:, n:] - ka[:, None])
    l_idx = np.empty((count, deck), dtype=np.int64)
    l_idx[:, :n] = rank_a  # excluded card sits at index 0: i-th other is order[i]
    l_idx[:, n:] = np.where(rank_b - 1 < ka[:, None], rank_b - 1, rank_b)
    np.clip(l_idx, 0, deck - 1, out=l_idx)
    l_of = np.take_along_axis(order, l_idx, axis=1).astype(np.int16)
    r_of = np.where(labels[None, :] < n, low_a[:, None], low_b[:, None]).astype(np.int16)
    r_of[marked] = -1
    l_of[marked] = -1
    return r_of, l_of


def bulk_marking_runs(profile: BiasProfile, c1: float, trials: int, seed: int,
                      *, always_mark: bool = False,
                      record_mark_times: bool = False,
                      record_first_k: int | None = None,
                      census: MarkingCensus | None = None,
                      max_steps: int | None = None) -> BulkMarkingResult:
    """Run many marking trajectories in one vectorised sweep."""
    n = profile.n
    deck = profile.deck_size
    a, b = profile.a, profile.b
    threshold = mark_threshold(deck, c1)
    cap = default_step_cap(deck) if max_steps is None else max_steps
    if trials < 1:
        raise ValueError("trials must be positive")
    if record_first_k is not None and not 1 <= record_first_k <= deck:
        raise ValueError("record_first_k out of range")
    rng = stream_rng(seed, STREAM_MARKING)

    labels = np.arange(deck, dtype=np.int16)
    card_at = np.tile(labels, (trials, 1))
    pos_of = card_at.copy()
    marked = np.zeros((trials, deck), dtype=bool)
    k = np.zeros(trials, dtype=np.int16)
    ka = np.zeros(trials, dtype=np.int16)
    kb = np.zeros(trials, dtype=np.int16)
    phase2 = np.zeros(trials, dtype=bool)
    r_of = np.full((trials, deck), -1, dtype=np.int16)
    l_of = np.full((trials, deck), -1, dtype=np.int16)
    orig = np.arange(trials, dtype=np.int64)

    out_decks = np.empty((trials, deck), dtype=np.int16)
    out_tp1 = np.zeros(trials, dtype=np.int64)
    out_tfull = np.zeros(trials, dtype=np.int64)
    out_times = np.zeros((trials, deck + 1), dtype=np.int64) if record_mark_times else None
    m_rec = record_first_k
    out_hit_labels = np.empty((trials, m_rec), dtype=np.int16) if m_rec else None
    out_hit_pos = np.empty((trials, m_rec), dtype=np.int16) if m_rec else None

    wt = np.where(labels < n, a, b)
    a_sq = a * a
    t = 0
    while card_at.shape[0]:
        t += 1
        if t > cap:
            raise RuntimeError(f"batched marking exceeded {cap} steps; "
                               f"{card_at.shape[0]} runs unfinished")
        batch = card_at.shape[0]
        rows = np.arange(batch)
        right = hands_from_uniforms(profile, rng.random(batch)).astype(np.int64)
        left = hands_from_uniforms(profile, rng.random(batch)).astype(np.int64)
        u_acc = rng.random(batch)

        p_r = pos_of[rows, right]
        p_l = pos_of[rows, left]
        pos_of[rows, right] = p_l
        pos_of[rows, left] = p_r
        card_at[rows, p_l] = right
        card_at[rows, p_r] = left

        m_r = marked[rows, right]
        m_l = marked[rows, left]
        w_r = wt[right]
        w_l = wt[left]
        in2 = phase2
        in1 = ~in2
        alive0 = k < deck
        ka_pre = ka.copy() if census is not None else None
        kb_pre = kb.copy() if census is not None else None

        trig1 = in1 & ~m_r & ~m_l
        if always_mark:
            acc1 = trig1
        else:
            acc1 = trig1 & (u_acc * (w_r * w_l) < a_sq)

        same = right == left
        case1 = in2 & same & ~m_r
        case2 = in2 & ~same & ~m_r & m_l
        case3 = in2 & ~same & m_r & ~m_l
        case4 = in2 & ~same & m_r & m_l
        if always_mark:
            ok1, ok2, ok3 = case1, case2, case3
        else:
            ok1 = case1 & (u_acc * w_r < a)
            ok2 = case2 & (u_acc * w_l < a)
            ok3 = case3 & (u_acc * w_r < a)
        mv2 = case2 & ~ok2
        mv3 = case3 & ~ok3

        match = (r_of == right[:, None]) & (l_of == left[:, None])
        u_card = match.argmax(axis=1)
        has_u = match[rows, u_card]
        trig4 = case4 & has_u
        if always_mark:
            ok4 = trig4
        else:
            ok4 = trig4 & (u_acc * (w_r * w_l) < a * wt[u_card])

        new_mark = np.where(acc1 | ok1 | ok2, right,
                            np.where(ok3, left,
                                     np.where(ok4, u_card, -1)))
        do_mark = new_mark >= 0

        if census is not None:
            rows1 = np.flatnonzero(in1)
            if rows1.size:
                cells1 = ka_pre[rows1].astype(np.int64) * (n + 1) + kb_pre[rows1]
                np.add.at(census.phase1_steps, cells1, 1)
                marked1 = acc1[rows1]
                if marked1.any():
                    np.add.at(census.phase1_marks, cells1[marked1], 1)
            rows2 = np.flatnonzero(in2 & alive0)
            if rows2.size:
                kind = np.full(batch, STAY, dtype=np.int64)
                kind[do_mark & (new_mark >= n)] = B_UP
                kind[do_mark & (new_mark < n) & (new_mark >= 0)] = A_UP
                move_to_a = (mv2 & (right < n)) | (mv3 & (left < n))
                kind[move_to_a] = MOVE
                cells2 = ka_pre[rows2].astype(np.int64) * (n + 1) + kb_pre[rows2]
                np.add.at(census.phase2_counts, (cells2, kind[rows2]), 1)

        midx = np.flatnonzero(do_mark)
        if midx.size:
            cards = new_mark[midx]
            marked[midx, cards] = True
            k[midx] += 1
            is_a = cards < n
            ka[midx] += is_a
            kb[midx] += ~is_a
            if out_times is not None:
                out_times[orig[midx], k[midx].astype(np.int64)] = t
            if m_rec is not None:
                hit = midx[k[midx] == m_rec]
                if hit.size:
                    got = np.argsort(~marked[hit], axis=1, kind="stable")[:, :m_rec]
                    out_hit_labels[orig[hit]] = got.astype(np.int16)
                    out_hit_pos[orig[hit]] = np.take_along_axis(
                        pos_of[hit], got, axis=1)

        vidx = np.flatnonzero(mv2 | mv3)
        if vidx.size:
            src = np.where(mv2[vidx], left[vidx], right[vidx])
            dst = np.where(mv2[vidx], right[vidx], left[vidx])
            marked[vidx, src] = False
            marked[vidx, dst] = True
            delta = (dst < n).astype(np.int16) - (src < n).astype(np.int16)
            ka[vidx] += delta
            kb[vidx] -= delta

        newly2 = ~phase2 & (k >= threshold)
        if newly2.any():
            out_tp1[orig[newly2]] = t
            phase2 |= newly2

        finished = do_mark & (k == deck)
        if finished.any():
            fin = np.flatnonzero(finished)
            out_tfull[orig[fin]] = t
            out_decks[orig[fin]] = card_at[fin]
            # dead rows keep riding until compaction; a stale assignment
            # could otherwise re-mark an already marked card
            r_of[fin] = -1
            l_of[fin] = -1

        rebuild = (do_mark | mv2 | mv3 | newly2) & phase2 & (k < deck)
        ridx = np.flatnonzero(rebuild)
        if ridx.size:
            key = np.where(marked[ridx], labels[None, :], labels[None, :] + deck)
            order = np.argsort(key, axis=1)
            r_new, l_new = _bulk_assignments(marked[ridx], ka[ridx], order, n)
            r_of[ridx] = r_new
            l_of[ridx] = l_new

        alive = k < deck
        dead = np.count_nonzero(~alive)
        if dead and (dead * 8 >= batch or dead == batch):
            keep = np.flatnonzero(alive)
            card_at = card_at[keep]
            pos_of = pos_of[keep]
            marked = marked[keep]
            k = k[keep]
            ka = ka[keep]
            kb = kb[keep]
            phase2 = phase2[keep]
            r_of = r_of[keep]
            l_of = l_of[keep]
            orig = orig[keep]

    return BulkMarkingResult(
        decks=out_decks, t_phase1=out_tp1, t_full=out_tfull,
        mark_times=out_times, hit_labels=out_hit_labels, hit_positions=out_hit_pos)


# --------------------------------------------------------------------------
# Uniformity testing and exact expectations
# --------------------------------------------------------------------------

def uniformity_test(profile: BiasProfile, c1: float, trials: int, seed: int,
                    *, conditional_m: int | None = 2,
                    always_mark: bool = False) -> dict:
    """Chi-square test that the deck at full marking is uniform over N!.

    Also reports the conditional diagnostic: at the first step with m cards
    marked, within each observed (marked labels, marked positions) class,
    chi-square of the induced arrangement against uniform over m! cells.
    Classes with fewer than 50 m! samples are skipped.  At a = 1 the
    conditional law is exactly uniform; under bias it carries a small
    systematic deviation (order 1e-2 per class at deck size 4), so treat
    the conditional p-values as a sensitivity probe, not a pass gate.
    """
    deck = profile.deck_size
    cells = factorials(deck)[deck]
    if trials < 100 * cells:
        raise ValueError(f"need at least {100 * cells} trials for {cells} cells")
    result = bulk_marking_runs(profile, c1, trials, seed,
                               always_mark=always_mark,
                               record_first_k=conditional_m)
    counts = np.bincount(encode_many(result.decks), minlength=cells)
    chi2 = stats.chisquare(counts)
    report = {
        "deck": deck,
        "a": profile.a,
        "c1": c1,
        "trials": trials,
        "always_mark": always_mark,
        "cells": int(cells),
        "statistic": float(chi2.statistic),
        "dof": int(cells - 1),
        "p_value": float(chi2.pvalue),
        "mean_t_phase1": float(result.t_phase1.mean()),
        "mean_t_full": float(result.t_full.mean()),
    }
    if conditional_m is not None:
        report["conditional"] = _conditional_uniformity(
            result.hit_labels, result.hit_positions, conditional_m)
    return report


def _conditional_uniformity(labels: np.ndarray, positions: np.ndarray, m: int) -> dict:
    arr_cells = factorials(m)[m]
    order = np.argsort(positions, axis=1)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(m)[None, :], axis=1)
    arrangement = encode_many(ranks)
    klass = np.concatenate([labels, np.sort(positions, axis=1)], axis=1)
    _, class_id, class_count = np.unique(
        klass, axis=0, return_inverse=True, return_counts=True)
    min_samples = 50 * arr_cells
    p_values = []
    tested = 0
    stat_sum = 0.0
    dof_sum = 0
    for cid in np.flatnonzero(class_count >= min_samples):
        sub = arrangement[class_id == cid]
        counts = np.bincount(sub, minlength=arr_cells)
        res = stats.chisquare(counts)
        p_values.append(float(res.pvalue))
        stat_sum += float(res.statistic)
        dof_sum += arr_cells - 1
        tested += 1
    combined_p = float(stats.chi2.sf(stat_sum, dof_sum)) if dof_sum else float("nan")
    return {
        "m": m,
        "classes_observed": int(class_count.size),
        "classes_tested": tested,
        "min_samples": int(min_samples),
        "min_p": min(p_values) if p_values else float("nan"),
        "combined_p": combined_p,
    }


def expected_phase1_time(profile: BiasProfile, c1: float) -> float:
    """Exact expected step count to finish phase one."""
    threshold = mark_threshold(profile.deck_size, c1)
    return sum(1.0 / phase1_marking_rate(profile, k) for k in range(threshold))


def expected_full_marking_time(profile: BiasProfile, c1: float) -> float:
    """Exact expected step count to full marking.

    Phase one is a sum of geometric means; its marked set is a uniform
    subset, so the phase-two start splits hypergeometrically over
    (ka, kb) and finishes at the type-count chain's absorption expectation.
    """
    n = profile.n
    deck = profile.deck_size
    m = mark_threshold(deck, c1)
    total = expected_phase1_time(profile, c1)
    absorb = type_chain.expected_absorption(n, profile.a)
    denom = math.comb(deck, m)
    for ka in range(max(0, m - n), min(n, m) + 1):
        weight = math.comb(n, ka) * math.comb(n, m - ka) / denom
        total += weight * absorb[ka, m - ka]
    return total


def gap_correlation_report(profile: BiasProfile, c1: float, trials: int,
                           seed: int) -> dict:
    """Empirical pairwise correlations of phase-two marking gaps.

    Reported only; no sign claim is asserted anywhere.
    """
    deck = profile.deck_size
    threshold = mark_threshold(deck, c1)
    result = bulk_marking_runs(profile, c1, trials, seed, record_mark_times=True)
    gaps = np.diff(result.mark_times[:, threshold:], axis=1).astype(float)
    if gaps.shape[1] >= 2:
        corr = np.corrcoef(gaps, rowvar=False)
        off = corr[np.triu_indices_from(corr, k=1)]
    else:
        off = np.full(1, np.nan)  # a single gap has no pair to correlate
    return {
        "deck": deck,
        "a": profile.a,
        "c1": c1,
        "trials": trials,
        "gap_count": gaps.shape[1],
        "mean_correlation": float(off.mean()),
        "min_correlation": float(off.min()),
        "max_correlation": float(off.max()),
        "fraction_negative": float((off < 0).mean()),
    }
