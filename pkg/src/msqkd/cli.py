"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 domain error, 3 no key material.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

from . import exact, keyrate, metrics
from .attacks import CollectiveAttack, NoiseParameters, StochasticChannel, UntrustedAttack, load_attack
from .errors import NoKeyError, SQKDError
from .protocol import VARIANTS, ProtocolConfig, SiftedStatistics, run_simulation

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_NO_KEY = 0, 1, 2, 3
SCENARIOS = [s.value for s in keyrate.Scenario]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1 instead of 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def parse_noise(text: str) -> NoiseParameters:
    """``Q`` or ``Q,QM,QR``; a single value sets all three."""
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid noise {text!r}; expected Q or Q,QM,QR") from None
    if len(values) == 1:
        values *= 3
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"invalid noise {text!r}; expected Q or Q,QM,QR")
    try:
        return NoiseParameters(*values)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def write_sweep_csv(curve: keyrate.SweepCurve, path: str | Path | None) -> str:
    """Write ``q,rate,scenario`` rows with six decimals; returns the text."""
    if not curve.points:
        raise ValueError("sweep curve is empty")
    lines = ["q,rate,scenario"]
    lines += [f"{_fmt(q)},{_fmt(r)},{curve.scenario}" for q, r in curve.points]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msqkd", description="Mediated semi-quantum key distribution simulator and key-rate bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte-Carlo run of the protocol under a stochastic channel")
    s.add_argument("--parties", type=int, default=2, help="number of classical users L (>= 2)")
    s.add_argument("--rounds", type=int, required=True, help="number of rounds (>= 1)")
    s.add_argument("--noise", type=parse_noise, default=NoiseParameters(0, 0, 0), help="Q or Q,QM,QR")
    s.add_argument("--seed", type=int, default=0, help="master RNG seed")
    s.add_argument("--variant", choices=VARIANTS, default="mediated", help="sifting variant")
    s.add_argument("--test-fraction", type=float, default=0.1, help="share of case2 rounds spent on testing")
    s.add_argument("--out", required=True, help="CSV trial log path; statistics JSON goes next to it")

    k = sub.add_parser("keyrate", help="key-rate lower bound from noise parameters or statistics")
    k.add_argument("--scenario", choices=SCENARIOS, required=True, help="adversary model")
    src = k.add_mutually_exclusive_group(required=True)
    src.add_argument("--noise", type=parse_noise, help="Q or Q,QM,QR")
    src.add_argument("--stats", help="statistics JSON written by simulate or exact")
    k.add_argument("--json", action="store_true", help="print all intermediate quantities as JSON")

    t = sub.add_parser("threshold", help="largest Q=QM=QR with a positive rate")
    t.add_argument("--scenario", choices=SCENARIOS, required=True, help="adversary model")
    t.add_argument("--tol", type=float, default=1e-6, help="bisection tolerance")

    w = sub.add_parser("sweep", help="rate curve over Q=QM=QR")
    w.add_argument("--scenario", choices=SCENARIOS, required=True, help="adversary model")
    w.add_argument("--from", dest="q_from", type=float, required=True, help="first grid point")
    w.add_argument("--to", dest="q_to", type=float, required=True, help="last grid point")
    w.add_argument("--steps", type=int, required=True, help="grid points (>= 2)")
    w.add_argument("--out", help="CSV path (standard output when omitted)")

    e = sub.add_parser("exact", help="exact statistics of an attack specification")
    e.add_argument("--attack", required=True, help="attack JSON (collective, untrusted or stochastic)")
    e.add_argument("--keyrate", action="store_true", help="also report the bound and the exact rate")

    m = sub.add_parser("metrics", help="qubit efficiency, communication cost and comparison table")
    m.add_argument("--parties", type=int, default=2, help="number of classical users L (>= 2)")
    m.add_argument("--format", choices=("text", "csv"), default="text", help="table format")
    return p


def _cmd_simulate(args) -> int:
    try:
        config = ProtocolConfig(args.parties, args.rounds, args.variant, args.seed, args.test_fraction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_simulation(config, StochasticChannel(args.noise))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    result.trials.write_csv(out)
    stats_path = out.with_suffix(".stats.json")
    result.stats.to_json(stats_path)
    counts = result.trials.case_counts()
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    n = result.stats.noise
    qm = "n/a" if n.qm is None else _fmt(n.qm)
    print(f"Q={_fmt(n.q)} QM={qm} QR={_fmt(n.qr)}")
    print(f"key_bits={len(next(iter(result.keys.values())))}")
    print(f"log={out} stats={stats_path}")
    return EXIT_OK


def _cmd_keyrate(args) -> int:
    source = args.noise if args.noise is not None else SiftedStatistics.from_json(args.stats)
    if args.scenario == keyrate.Scenario.SEMI_HONEST.value:
        result = keyrate.semi_honest_key_rate(source)
    else:
        result = keyrate.untrusted_key_rate(source)
    if args.json:
        print(json.dumps(result.as_dict(), indent=2))
    else:
        print(f"rate {_fmt(result.rate)}")
        for c in result.clamps:
            print(f"clamped: {c}", file=sys.stderr)
    return EXIT_OK


def _cmd_threshold(args) -> int:
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    print(_fmt(keyrate.noise_threshold(args.scenario, args.tol).threshold_Q))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            curve = keyrate.sweep(args.scenario, args.q_from, args.q_to, args.steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if curve.monotonicity_violations:
        print(f"warning: rate not monotone at grid points {curve.monotonicity_violations}", file=sys.stderr)
    text = write_sweep_csv(curve, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_exact(args) -> int:
    attack = load_attack(args.attack)
    if isinstance(attack, CollectiveAttack):
        stats, scenario = exact.exact_statistics_semi_honest(attack), "semi-honest"
    elif isinstance(attack, UntrustedAttack):
        stats, scenario = exact.exact_statistics_untrusted(attack), "untrusted"
    else:
        stats, scenario = exact.channel_statistics(attack), None
    out = stats.as_dict()
    if args.keyrate:
        if scenario == "semi-honest":
            out["bound"] = keyrate.semi_honest_key_rate(stats).rate
            out["exact_rate"] = exact.exact_key_rate_semi_honest(attack)
        elif scenario == "untrusted":
            out["bound"] = keyrate.untrusted_key_rate(stats).rate
            out["exact_rate"] = exact.exact_key_rate_untrusted(attack)
        else:
            out["bound_semi_honest"] = keyrate.semi_honest_key_rate(stats).rate
            out["bound_untrusted"] = keyrate.untrusted_key_rate(stats).rate
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_metrics(args) -> int:
    try:
        report = metrics.comparison_table(args.parties)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"qubit_efficiency {report.qubit_efficiency}")
    print(f"communication_cost {report.communication_cost_qubits}")
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_text())
    return EXIT_OK


COMMANDS = {
    "simulate": _cmd_simulate,
    "keyrate": _cmd_keyrate,
    "threshold": _cmd_threshold,
    "sweep": _cmd_sweep,
    "exact": _cmd_exact,
    "metrics": _cmd_metrics,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"msqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoKeyError as exc:
        print(f"msqkd {args.command}: no key: {exc}", file=sys.stderr)
        return EXIT_NO_KEY
    except (SQKDError, ValueError) as exc:
        print(f"msqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"msqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
