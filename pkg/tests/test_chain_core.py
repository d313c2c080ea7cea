"""Walk primitives: bias profiles, hand sampling, deck state, single steps."""
import math

import numpy as np
import pytest

from biased_shuffle.chain_core import (
    BiasProfile,
    DeckState,
    MoveRecord,
    hands_from_uniforms,
    make_bias_profile,
    pair_probability,
    sample_hand,
    sample_hands,
    step,
    stream_rng,
)


class TestBiasProfile:
    def test_basic_fields(self):
        p = make_bias_profile(2, 0.5)
        assert p.b == 1.5
        assert p.deck_size == 4
        assert p.weights().tolist() == [0.5, 0.5, 1.5, 1.5]
        assert p.hand_probability(0) == pytest.approx(0.125)
        assert p.hand_probability(3) == pytest.approx(0.375)

    def test_unbiased_profile_is_flat(self):
        p = make_bias_profile(3, 1.0)
        assert p.b == 1.0
        assert all(p.hand_probability(c) == pytest.approx(1 / 6) for c in range(6))

    def test_type_split(self):
        p = make_bias_profile(3, 0.7)
        assert [p.is_type_a(c) for c in range(6)] == [True] * 3 + [False] * 3
        assert p.weight(2) == pytest.approx(0.7)
        assert p.weight(3) == pytest.approx(1.3)

    @pytest.mark.parametrize("n,a", [(0, 0.5), (-1, 0.5), (2, 0.0),
                                     (2, -0.1), (2, 1.5)])
    def test_rejects_bad_parameters(self, n, a):
        with pytest.raises(ValueError):
            make_bias_profile(n, a)

    def test_weight_out_of_range(self):
        p = make_bias_profile(2, 0.5)
        with pytest.raises(ValueError):
            p.weight(4)
        with pytest.raises(ValueError):
            p.weight(-1)

    def test_hand_probabilities_sum_to_one(self):
        for a in (0.25, 0.5, 1.0):
            p = make_bias_profile(5, a)
            total = sum(p.hand_probability(c) for c in range(10))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestSampling:
    def test_hand_frequencies_match_bias(self):
        p = make_bias_profile(3, 0.5)
        rng = stream_rng(123, 50)
        draws = sample_hands(p, rng, 100_000)
        counts = np.bincount(draws, minlength=6)
        for c in range(6):
            expect = p.hand_probability(c)
            sigma = math.sqrt(expect * (1 - expect) / draws.size)
            assert abs(counts[c] / draws.size - expect) < 4 * sigma

    def test_identity_draw_rate_unbiased(self):
        # both hands land on the same card with probability sum p_i^2 = 1/4
        p = make_bias_profile(2, 1.0)
        rng = stream_rng(9, 51)
        r = sample_hands(p, rng, 200_000)
        l = sample_hands(p, rng, 200_000)
        rate = float((r == l).mean())
        assert abs(rate - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 200_000)

    def test_vectorized_matches_scalar_inversion(self):
        p = make_bias_profile(4, 0.3)
        u = np.linspace(0.0, 1.0 - 1e-9, 4097)
        vec = hands_from_uniforms(p, u)

        class _One:
            def __init__(self, value):
                self.value = value

            def random(self):
                return self.value

        scalar = np.array([sample_hand(p, _One(v)) for v in u])
        assert (vec == scalar).all()

    def test_edge_uniform_values_stay_in_range(self):
        p = make_bias_profile(2, 0.5)
        hands = hands_from_uniforms(p, np.array([0.0, 0.5 - 1e-16, 0.9999999, 1.0 - 1e-16]))
        assert hands.min() >= 0 and hands.max() <= 3

    def test_pair_probability_example(self):
        p = make_bias_profile(2, 0.5)
        # one type-A hand (1/8) and one type-B hand (3/8)
        assert pair_probability(p, 0, 2) == pytest.approx(0.046875, abs=1e-15)

    def test_ordered_pair_probabilities_total_one(self):
        for a in (0.25, 0.5, 1.0):
            p = make_bias_profile(3, a)
            total = sum(pair_probability(p, i, j)
                        for i in range(6) for j in range(6))
            assert total == pytest.approx(1.0, abs=1e-12)


class TestDeckState:
    def test_initial_identity(self):
        d = DeckState(3)
        assert d.card_at == list(range(6))
        assert d.pos_of == list(range(6))
        assert d.is_bijection()

    def test_swap_and_inverse_consistency(self):
        d = DeckState(2)
        d.swap_cards(0, 3)
        assert d.card_at[0] == 3 and d.card_at[3] == 0
        assert d.pos_of[3] == 0 and d.pos_of[0] == 3
        d.swap_cards(1, 1)  # no-op
        assert d.is_bijection()

    def test_copy_is_independent(self):
        d = DeckState(2)
        e = d.copy()
        e.swap_cards(0, 1)
        assert d.card_at == list(range(4))
        assert d != e

    def test_bijection_under_fuzzed_swaps(self):
        d = DeckState(4)
        rng = stream_rng(77, 52)
        pairs = rng.integers(0, 8, size=(200_000, 2))
        for c1, c2 in pairs:
            d.swap_cards(int(c1), int(c2))
        assert d.is_bijection()
        # replaying the same swaps restores the identity
        for c1, c2 in pairs[::-1]:
            d.swap_cards(int(c1), int(c2))
        assert d.card_at == list(range(8))


class TestStep:
    def test_step_is_pure(self):
        p = make_bias_profile(2, 0.5)
        d = DeckState(2)
        rng = stream_rng(5, 53)
        new, move = step(d, p, rng)
        assert d.card_at == list(range(4))
        assert isinstance(move, MoveRecord)
        assert move.t == 1
        assert new.pos_of[move.right] == d.pos_of[move.left] or move.right == move.left

    def test_time_counter_threads_through(self):
        p = make_bias_profile(2, 1.0)
        d = DeckState(2)
        rng = stream_rng(6, 54)
        for expected_t in range(1, 6):
            d, move = step(d, p, rng, t=expected_t)
            assert move.t == expected_t
        assert d.is_bijection()

    def test_one_step_law_unbiased(self):
        # at a=1 a single step leaves identity w.p. 1/4, else a uniform swap
        p = make_bias_profile(2, 1.0)
        rng = stream_rng(31, 55)
        stay = 0
        trials = 100_000
        for _ in range(trials):
            d, move = step(DeckState(2), p, rng)
            if move.right == move.left:
                stay += 1
        assert abs(stay / trials - 0.25) < 4 * math.sqrt(0.25 * 0.75 / trials)


class TestStreams:
    def test_same_path_reproduces(self):
        a = stream_rng(42, 1, 2).random(5)
        b = stream_rng(42, 1, 2).random(5)
        assert (a == b).all()

    def test_distinct_paths_differ(self):
        a = stream_rng(42, 1, 2).random(5)
        b = stream_rng(42, 1, 3).random(5)
        c = stream_rng(43, 1, 2).random(5)
        assert not (a == b).all()
        assert not (a == c).all()
