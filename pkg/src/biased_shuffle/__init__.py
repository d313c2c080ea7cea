"""Simulation and verification lab for the biased random transposition shuffle.

A deck of 2n cards is shuffled by repeatedly picking two cards with a
type-dependent bias and swapping them.  The package provides exact
small-deck distance computations, a strong-uniform-time marking scheme with
its permutation factorization, the absorbing type-count chain that governs
the marking tail, and coupon-collector lower-bound tooling, all behind a
reproducible command line.
"""

__version__ = "0.1.0"

from .chain_core import (
    BiasProfile,
    DeckState,
    MoveRecord,
    DEFAULT_SEED,
    make_bias_profile,
    pair_probability,
    sample_hand,
    sample_hands,
    step,
    stream_rng,
)
from .exact_analysis import (
    CapacityError,
    DistanceCurve,
    TransitionOperator,
    build_operator,
    cutoff_profile,
    decode_perm,
    encode_perm,
    evolve,
    mixing_time,
    point_mass,
    separation_distance,
    theory_time,
    tv_distance,
)
from .marking import (
    MarkingState,
    PairAssignment,
    build_assignment,
    bulk_marking_runs,
    expected_full_marking_time,
    expected_phase1_time,
    factorization_check,
    mark_threshold,
    run_to_full_marking,
    uniformity_test,
)
from .type_chain import (
    TransitionRow,
    absorption_bound_table,
    expected_absorption,
    harmonic_probe,
    phase2_time_scale,
    transition_row,
    variance_bound,
)
from .bounds import (
    coupon_expectation,
    derangement_count,
    estimate_fixed_mass,
    lower_bound_sweep,
    sample_touch_picks,
    simulate_walks,
    tv_lower_bound,
    uniform_fixed_mass,
    uniform_fixed_pmf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
