"""Biased random transposition walk on a two-type deck.

A deck holds N = 2n cards.  Cards 0..n-1 (type A) are picked by a hand with
probability a/N each, cards n..2n-1 (type B) with probability b/N each, where
b = 2 - a and 0 < a <= 1 <= b.  One step of the walk draws a right card R and
a left card L independently from that law and swaps their positions, so the
unordered transposition {i, j} is applied with probability 2 p_i p_j and the
deck stays put with probability sum_i p_i^2.

Randomness policy: every Monte Carlo consumer derives its generator through
``stream_rng``, so trial i of a run is a pure function of (seed, stream tag,
i) and results do not depend on batching or worker layout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Seed used by the command line tools when none is given.
DEFAULT_SEED = 1729

# Stream tags keep independent engines off each other's random streams.
STREAM_WALK = 1
STREAM_MARKING = 2
STREAM_TYPECHAIN = 3
STREAM_TOUCH = 4
STREAM_UNIFORMITY = 5


def stream_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator derived from (seed, path).

    Distinct paths give statistically independent streams, so per-trial
    generators can be re-created anywhere without coordination.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *path])))


@dataclass(frozen=True)
class BiasProfile:
    """Hand-selection law: n cards of weight a, n of weight b = 2 - a."""

    n: int
    a: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if not (0.0 < self.a <= 1.0):
            raise ValueError("a must lie in (0, 1]")

    @property
    def b(self) -> float:
        return 2.0 - self.a

    @property
    def deck_size(self) -> int:
        return 2 * self.n

    def weight(self, card: int) -> float:
        """Unnormalised hand weight of a card label."""
        if not 0 <= card < self.deck_size:
            raise ValueError(f"card label {card} out of range 0..{self.deck_size - 1}")
        return self.a if card < self.n else self.b

    def hand_probability(self, card: int) -> float:
        return self.weight(card) / self.deck_size

    def is_type_a(self, card: int) -> bool:
        return 0 <= card < self.n

    def weights(self) -> np.ndarray:
        """Vector of hand weights indexed by card label."""
        w = np.full(self.deck_size, self.b)
        w[: self.n] = self.a
        return w


def make_bias_profile(n: int, a: float) -> BiasProfile:
    """Validated constructor for :class:`BiasProfile`."""
    return BiasProfile(n=int(n), a=float(a))


class MoveRecord(NamedTuple):
    """One applied step: right and left hand cards at step t (1-based)."""

    t: int
    right: int
    left: int


class DeckState:
    """Mutable permutation state.

    ``card_at[pos]`` is the card at a position, ``pos_of[card]`` its inverse.
    Both are plain lists; the walk only ever swaps two entries at a time.
    """

    __slots__ = ("n", "card_at", "pos_of")

    def __init__(self, n: int, card_at: list[int] | None = None):
        self.n = n
        if card_at is None:
            self.card_at = list(range(2 * n))
        else:
            if sorted(card_at) != list(range(2 * n)):
                raise ValueError("card_at is not a permutation of 0..2n-1")
            self.card_at = list(card_at)
        self.pos_of = [0] * (2 * n)
        for pos, card in enumerate(self.card_at):
            self.pos_of[card] = pos

    @property
    def deck_size(self) -> int:
        return 2 * self.n

    def copy(self) -> "DeckState":
        out = DeckState.__new__(DeckState)
        out.n = self.n
        out.card_at = list(self.card_at)
        out.pos_of = list(self.pos_of)
        return out

    def swap_cards(self, c1: int, c2: int) -> None:
        """Exchange the positions of two cards (no-op when c1 == c2)."""
        p1, p2 = self.pos_of[c1], self.pos_of[c2]
        self.pos_of[c1], self.pos_of[c2] = p2, p1
        self.card_at[p1], self.card_at[p2] = c2, c1

    def is_bijection(self) -> bool:
        seen = bytearray(self.deck_size)
        for card in self.card_at:
            if not 0 <= card < self.deck_size or seen[card]:
                return False
            seen[card] = 1
        return all(self.card_at[self.pos_of[c]] == c for c in range(self.deck_size))

    def __eq__(self, other) -> bool:
        return isinstance(other, DeckState) and self.card_at == other.card_at

    def __repr__(self) -> str:
        return f"DeckState({self.card_at})"


def sample_hand(profile: BiasProfile, rng: np.random.Generator) -> int:
    """Draw one card label from the hand law by inverse CDF."""
    u = rng.random()
    half_a = 0.5 * profile.a  # total mass of the type-A block
    if u < half_a:
        card = int(u * profile.deck_size / profile.a)
        return min(card, profile.n - 1)
    card = profile.n + int((u - half_a) * profile.deck_size / profile.b)
    return min(card, profile.deck_size - 1)


def hands_from_uniforms(profile: BiasProfile, u: np.ndarray) -> np.ndarray:
    """Vectorised inverse-CDF map from uniforms in [0, 1) to card labels."""
    n, size = profile.n, profile.deck_size
    half_a = 0.5 * profile.a
    low = np.minimum((u * (size / profile.a)).astype(np.int64), n - 1)
    high = n + np.minimum(((u - half_a) * (size / profile.b)).astype(np.int64), n - 1)
    return np.where(u < half_a, low, high).astype(np.int16)


def sample_hands(profile: BiasProfile, rng: np.random.Generator, size: int) -> np.ndarray:
    return hands_from_uniforms(profile, rng.random(size))


def step(state: DeckState, profile: BiasProfile, rng: np.random.Generator,
         t: int = 1) -> tuple[DeckState, MoveRecord]:
    """Apply one walk step and return the new state plus its move record."""
    if state.n != profile.n:
        raise ValueError("deck size does not match profile")
    right = sample_hand(profile, rng)
    left = sample_hand(profile, rng)
    out = state.copy()
    out.swap_cards(right, left)
    return out, MoveRecord(t=t, right=right, left=left)


def pair_probability(profile: BiasProfile, i: int, j: int) -> float:
    """Probability that an ordered hand pair lands on (i, j)."""
    return profile.hand_probability(i) * profile.hand_probability(j)
