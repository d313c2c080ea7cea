"""Command line front end.

Subcommands map one-to-one onto the library layers: ``exact`` for small-deck
distance curves, ``simulate`` for walk samples of the fixed-count
observable, ``marking`` for the two-phase marking engines, ``typechain``
for the type-count chain tables, ``lowerbound`` for the coupon-collector
TV bound, and ``conjecture`` for the weighted-diagonal harmonic probe.

Every output starts with a one-line reproducibility header::

    # config {"a": 0.5, "command": "exact", ...}

holding the full effective parameter set as canonical JSON, so a run can be
reproduced from its output alone (``parse_header`` round-trips it).  Some
commands add a second ``# result {...}`` line with derived summary values.
Outputs are plain CSV after the comment lines, or indented JSON for the
report-style modes.  Reruns with identical parameters produce identical
bytes.

A JSON config file may supply any subset of a subcommand's options (keys
use underscores); explicit flags win over config values, config values win
over built-in defaults, and unknown keys are rejected.  Relative output
paths resolve against ``BIASED_SHUFFLE_OUTDIR`` when it is set.

Exit codes: 0 success, 2 usage error, 3 state space too large, 4 internal
invariant violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext

from . import __version__, bounds, marking, type_chain
from .chain_core import DEFAULT_SEED, STREAM_MARKING, make_bias_profile, stream_rng
from .exact_analysis import (
    CapacityError,
    build_operator,
    cutoff_profile,
    mixing_time,
    theory_time,
)


class UsageError(Exception):
    pass


class InvariantViolation(Exception):
    pass


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(part) for part in str(value).split(",") if part.strip()]


def _float_list(value) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(part) for part in str(value).split(",") if part.strip()]


def _profile_from(ns) -> "BiasProfile":
    deck = int(ns.deck)
    if deck < 2 or deck % 2:
        raise UsageError("deck size must be a positive even number")
    return make_bias_profile(deck // 2, float(ns.a))


def _resolve_out(path: str | None) -> str | None:
    if path in (None, "-"):
        return None
    outdir = os.environ.get("BIASED_SHUFFLE_OUTDIR")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _header_params(ns) -> dict:
    skip = {"command", "config", "out", "func"}
    params = {k: v for k, v in vars(ns).items() if k not in skip}
    params["command"] = ns.command
    params["version"] = __version__
    return params


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _emit(ns, columns, rows, result: dict | None = None, payload=None) -> None:
    """Write header line, optional result line, then CSV rows or a JSON payload."""
    target = _resolve_out(ns.out)
    ctx = open(target, "w", newline="") if target else nullcontext(sys.stdout)
    with ctx as fh:
        fh.write("# config " + json.dumps(_header_params(ns), sort_keys=True) + "\n")
        if result is not None:
            fh.write("# result " + json.dumps(result, sort_keys=True) + "\n")
        if payload is not None:
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def parse_header(line: str) -> dict:
    """Recover the parameter dict from an output's first line."""
    prefix = "# config "
    if not line.startswith(prefix):
        raise ValueError("not a config header line")
    return json.loads(line[len(prefix):])


def read_header(path: str) -> dict:
    with open(path) as fh:
        return parse_header(fh.readline().rstrip("\n"))


# --------------------------------------------------------------------------
# Subcommand bodies
# --------------------------------------------------------------------------

def cmd_exact(ns) -> int:
    profile = _profile_from(ns)
    op = build_operator(profile, max_deck=int(ns.max_deck))
    t_max = int(ns.t_max) if ns.t_max is not None else 2 * theory_time(profile)
    if t_max < 0:
        raise UsageError("t-max must be nonnegative")
    curve = cutoff_profile(op, range(t_max + 1))
    result = {
        "theory_time": theory_time(profile),
        "mixing_time_tv": mixing_time(op, float(ns.eps), metric="tv"),
        "mixing_time_separation": mixing_time(op, float(ns.eps), metric="separation"),
    }
    rows = [(t, tv, sep) for t, tv, sep in curve.rows]
    _emit(ns, ("t", "tv", "separation"), rows, result=result)
    return 0


def cmd_simulate(ns) -> int:
    profile = _profile_from(ns)
    t = int(ns.t)
    trials = int(ns.trials)
    res = bounds.simulate_walks(profile, [t], trials, int(ns.seed))
    counts = res.counts[:, 0]
    rows = [(i, int(c)) for i, c in enumerate(counts)]
    _emit(ns, ("trial", "count"), rows,
          result={"mean_count": float(counts.mean()), "t": t})
    return 0


def cmd_marking(ns) -> int:
    profile = _profile_from(ns)
    c1 = float(ns.c1)
    trials = int(ns.trials)
    seed = int(ns.seed)
    checks = int(ns.verify_factorization)
    for i in range(checks):
        rng = stream_rng(seed, STREAM_MARKING, 7, i)
        try:
            marking.run_to_full_marking(profile, c1, rng, check_each_step=True)
        except AssertionError as exc:
            raise InvariantViolation(f"factorization check failed: {exc}") from exc
    if ns.mode == "uniformity":
        report = marking.uniformity_test(profile, c1, trials, seed,
                                         always_mark=ns.always_mark)
        _emit(ns, (), (), payload=report)
    elif ns.mode == "gaps":
        report = marking.gap_correlation_report(profile, c1, trials, seed)
        _emit(ns, (), (), payload=report)
    else:
        res = marking.bulk_marking_runs(profile, c1, trials, seed,
                                        always_mark=ns.always_mark)
        result = {
            "mean_t_phase1": float(res.t_phase1.mean()),
            "mean_t_full": float(res.t_full.mean()),
            "expected_t_phase1": marking.expected_phase1_time(profile, c1),
            "expected_t_full": marking.expected_full_marking_time(profile, c1),
        }
        rows = [(i, int(p), int(f))
                for i, (p, f) in enumerate(zip(res.t_phase1, res.t_full))]
        _emit(ns, ("trial", "t_phase1", "t_full"), rows, result=result)
    return 0


def cmd_typechain(ns) -> int:
    n = int(ns.n)
    a = float(ns.a)
    if ns.mode == "rows":
        rows = []
        for ka in range(n + 1):
            for kb in range(n + 1):
                row = type_chain.transition_row(n, a, ka, kb)
                rows.append((ka, kb, row.p_b_up, row.p_a_up, row.p_move, row.p_stay))
        _emit(ns, ("k_a", "k_b", "p_b_up", "p_a_up", "p_move", "p_stay"), rows)
    elif ns.mode == "absorption":
        table = type_chain.expected_absorption(n, a)
        rows = [(ka, kb, float(table[ka, kb]))
                for ka in range(n + 1) for kb in range(n + 1)]
        _emit(ns, ("k_a", "k_b", "expected_steps"), rows)
    else:
        c1 = float(ns.c1)
        scale = type_chain.phase2_time_scale(n, a, c1)
        table = type_chain.absorption_bound_table(n, a)
        rows = [(ka, kb, float(table[ka, kb]), float(scale * table[ka, kb]))
                for ka in range(n + 1) for kb in range(n + 1)]
        _emit(ns, ("k_a", "k_b", "s_tilde", "bound"), rows,
              result={"scale": scale})
    return 0


def cmd_lowerbound(ns) -> int:
    profile = _profile_from(ns)
    threshold = int(ns.threshold) if ns.threshold is not None \
        else bounds.suggested_threshold(profile.n)
    if ns.t_list is not None:
        ts = _int_list(ns.t_list)
    else:
        star = theory_time(profile)
        ts = sorted({max(1, round(m * star)) for m in _float_list(ns.multiples)})
    rows = bounds.lower_bound_sweep(profile, ts, threshold,
                                    int(ns.trials), int(ns.seed))
    _emit(ns, ("t", "threshold", "estimate", "stderr", "uniform_mass", "bound"),
          rows, result={"theory_time": theory_time(profile)})
    return 0


def cmd_conjecture(ns) -> int:
    rows = []
    for n in _int_list(ns.n_list):
        for c1 in _float_list(ns.c1_list):
            probe = type_chain.harmonic_probe(n, c1, float(ns.a))
            rows.append((n, c1, float(ns.a), probe["weighted_sum"],
                         probe["harmonic"], probe["ratio"]))
    _emit(ns, ("n", "c1", "a", "weighted_sum", "harmonic", "ratio"), rows)
    return 0


# --------------------------------------------------------------------------
# Parser assembly
# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="biased-shuffle",
        description="Simulation and verification lab for the biased "
                    "transposition shuffle.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    registry = {}

    def sub(name, func, help_text):
        p = subs.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", default=None,
                       help="JSON file supplying option defaults")
        p.add_argument("--out", default=None,
                       help="output path ('-' or omitted: stdout)")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        registry[name] = p
        return p

    p = sub("exact", cmd_exact, "exact distance curve for a small deck")
    p.add_argument("--deck", type=int, default=4)
    p.add_argument("-a", type=float, default=1.0, dest="a")
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--max-deck", type=int, default=8)

    p = sub("simulate", cmd_simulate, "sample the in-place count along the walk")
    p.add_argument("--deck", type=int, default=12)
    p.add_argument("-a", type=float, default=0.5, dest="a")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--trials", type=int, default=10000)

    p = sub("marking", cmd_marking, "two-phase marking runs and checks")
    p.add_argument("--deck", type=int, default=4)
    p.add_argument("-a", type=float, default=0.5, dest="a")
    p.add_argument("--c1", type=float, default=0.75)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--mode", choices=("runs", "uniformity", "gaps"),
                   default="runs")
    p.add_argument("--always-mark", action="store_true",
                   help="skip acceptance coins (negative control)")
    p.add_argument("--verify-factorization", type=int, default=0,
                   metavar="RUNS", help="scalar runs with per-step checks")

    p = sub("typechain", cmd_typechain, "type-count chain tables")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("-a", type=float, default=0.5, dest="a")
    p.add_argument("--c1", type=float, default=0.75)
    p.add_argument("--mode", choices=("rows", "absorption", "bound"),
                   default="rows")

    p = sub("lowerbound", cmd_lowerbound, "coupon-collector TV lower bound")
    p.add_argument("--deck", type=int, default=12)
    p.add_argument("-a", type=float, default=0.5, dest="a")
    p.add_argument("--threshold", type=int, default=None)
    p.add_argument("--t-list", default=None,
                   help="comma separated checkpoint steps")
    p.add_argument("--multiples", default="0.25,0.5,0.75,1.0,1.25",
                   help="checkpoints as multiples of the theory time")
    p.add_argument("--trials", type=int, default=20000)

    p = sub("conjecture", cmd_conjecture, "weighted diagonal harmonic probe")
    p.add_argument("--n-list", default="4,8,16", dest="n_list")
    p.add_argument("--c1-list", default="0.75", dest="c1_list")
    p.add_argument("-a", type=float, default=0.5, dest="a")

    return parser, registry


def _apply_config(parser, registry, argv):
    probe = parser.parse_args(argv)
    if getattr(probe, "config", None) is None:
        return probe
    with open(probe.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    command = probe.command
    if cfg.get("command", command) != command:
        raise UsageError(
            f"config is for '{cfg['command']}', not '{command}'")
    allowed = {action.dest for action in registry[command]._actions}
    allowed -= {"help", "func"}
    unknown = sorted(set(cfg) - allowed - {"command"})
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    registry[command].set_defaults(
        **{k: v for k, v in cfg.items() if k != "command"})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, registry = build_parser()
    try:
        ns = _apply_config(parser, registry, argv)
        return ns.func(ns)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
