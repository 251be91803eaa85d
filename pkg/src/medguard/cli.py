"""Command-line entry point: hash, sign, verify, simulate, reliability, bench.

Every subcommand is scriptable: no prompts, output on stdout, diagnostics
on stderr, deterministic given a seed (timings excepted).  Exit codes are
part of the contract and shared across subcommands.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from random import Random

from . import record_protocol, reliability, system_sim
from .record_protocol import InvalidRecord, MalformedBlob, SignedBlob, TamperDetected
from .secure_channel import AuthFailure
from .sha256_core import Sha256
from .synthdata import synthetic_health_record

EXIT_OK = 0
EXIT_INTEGRITY = 2
EXIT_MALFORMED = 3
EXIT_AUTH = 4
EXIT_NUMERIC = 5
EXIT_USAGE = 64

_EPILOG = """\
exit codes:
  0   success
  2   integrity failure (digest mismatch / tampering detected)
  3   malformed input (unreadable file, bad record, bad script, bad rate table)
  4   authorization or authentication failure
  5   numerical failure (singular system, step too large)
  64  usage error

MEDGUARD_SEED overrides the default seed when --seed is not given.
"""


class _Parser(argparse.ArgumentParser):
    def exit(self, status: int = 0, message: str | None = None):  # noqa: A003
        if message:
            sys.stderr.write(message)
        raise SystemExit(EXIT_USAGE if status else 0)


def _default_seed() -> int:
    env = os.environ.get("MEDGUARD_SEED")
    return int(env) if env else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="medguard",
        description="Signed health-record tooling and availability analysis.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_hash = sub.add_parser("hash", help="print the SHA-256 digest of a file")
    p_hash.add_argument("file", type=Path)

    p_sign = sub.add_parser("sign", help="sign a JSON record into a binary blob")
    p_sign.add_argument("record", type=Path, help="record or command in the editable JSON form")
    p_sign.add_argument("-o", "--output", type=Path, required=True, help="output blob path")

    p_verify = sub.add_parser("verify", help="verify a signed blob")
    p_verify.add_argument("blob", type=Path)

    p_sim = sub.add_parser("simulate", help="run a scenario script")
    p_sim.add_argument("script", type=Path)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--log", type=Path, default=None, help="write the event log here instead of stdout")

    p_rel = sub.add_parser("reliability", help="solve the 12-state availability model")
    p_rel.add_argument("--rates", type=Path, default=None, help="rate table file (default: bundled)")
    p_rel.add_argument("--horizon", type=float, default=10_000.0)
    p_rel.add_argument("--step", type=float, default=1.0)
    p_rel.add_argument("--steady", action="store_true", help="stationary solve instead of transient")
    p_rel.add_argument(
        "--compare-reference",
        action="store_true",
        help="report when transient availability meets the case-study reference values",
    )
    p_rel.add_argument("--time-unit", default="hour")

    p_bench = sub.add_parser("bench", help="time sign+verify over synthetic records")
    p_bench.add_argument("--samples", type=int, default=70)
    p_bench.add_argument("--seed", type=int, default=None)

    return parser


# --- subcommands ---------------------------------------------------------------

def cmd_hash(args: argparse.Namespace) -> int:
    hasher = Sha256()
    try:
        with open(args.file, "rb") as handle:
            while chunk := handle.read(1 << 20):
                hasher.update(chunk)
    except OSError as exc:
        print(f"medguard: cannot read {args.file}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    print(hasher.hexdigest())
    return EXIT_OK


def cmd_sign(args: argparse.Namespace) -> int:
    try:
        text = args.record.read_text()
    except OSError as exc:
        print(f"medguard: cannot read {args.record}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    record = record_protocol.record_from_json(text)
    blob = record_protocol.sign(record)
    args.output.write_bytes(blob.to_bytes())
    print(f"signed {args.output} payload={len(blob.payload)} digest={blob.digest.hex()}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        raw = args.blob.read_bytes()
    except OSError as exc:
        print(f"medguard: cannot read {args.blob}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    record = record_protocol.verify(SignedBlob.from_bytes(raw))
    kind = "health_record" if isinstance(record, record_protocol.HealthRecord) else "prescription_command"
    print(f"valid {kind} patient={record.patient_id}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        script = args.script.read_text()
    except OSError as exc:
        print(f"medguard: cannot read {args.script}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    seed = args.seed if args.seed is not None else _default_seed()
    sim = system_sim.run_scenario(script, seed=seed)
    text = sim.log.to_text()
    if args.log is not None:
        args.log.write_text(text)
        print(f"wrote {len(sim.log.entries)} events to {args.log}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _print_distribution(dist: reliability.StateDistribution) -> None:
    for index, value in enumerate(dist.p, start=1):
        print(f"P{index}={value:.9e}")
    print(f"availability={reliability.availability(dist):.9f}")


def cmd_reliability(args: argparse.Namespace) -> int:
    try:
        if args.rates is None:
            table = reliability.bundled_rate_table(time_unit=args.time_unit)
        else:
            table = reliability.load_rate_file(args.rates, time_unit=args.time_unit)
    except (OSError, ValueError, reliability.UnknownEdge, reliability.NegativeRate) as exc:
        print(f"medguard: bad rate table: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    for edge in table.defaulted:
        print(
            f"note: no rate supplied for {edge[0]}->{edge[1]}; defaulted to 0",
            file=sys.stderr,
        )
    if table.defaulted:
        print("defaulted_rates=" + ",".join(f"{i}->{j}" for i, j in table.defaulted))
    model = reliability.build_generator(table)
    print(f"time_unit={table.time_unit}")
    if args.compare_reference:
        comparison = reliability.compare_with_reference(model, time_unit=table.time_unit)
        for line in comparison.report_lines():
            print(line)
        return EXIT_OK
    if args.steady:
        print("mode=steady")
        _print_distribution(reliability.steady_state(model))
        return EXIT_OK
    print(f"mode=transient horizon={args.horizon:g} step={args.step:g}")
    solution = reliability.solve_transient(
        model, reliability.initial_distribution(), horizon=args.horizon, step=args.step
    )
    _print_distribution(solution.final)
    print(f"max_conservation_error={solution.max_conservation_error:.3e}")
    print(f"min_probability={solution.min_probability:.3e}")
    return EXIT_OK


@dataclass(frozen=True)
class BenchReport:
    """Per-sample sign+verify timings; mean and stddev recomputed exactly."""

    seconds: tuple[float, ...]

    @property
    def mean(self) -> float:
        return statistics.fmean(self.seconds)

    @property
    def stddev(self) -> float:
        return statistics.pstdev(self.seconds)


REFERENCE_MEAN_SECONDS = 5.8e-04  # informational only; timing is hardware-dependent


def run_bench(samples: int, seed: int) -> tuple[BenchReport, list[str]]:
    rng = Random(seed)
    records = [
        synthetic_health_record(rng, f"bench-{i:03d}", 1_700_000_000 + 60 * i)
        for i in range(samples)
    ]
    rows = []
    seconds = []
    for i, record in enumerate(records, start=1):
        start = time.perf_counter()
        blob = record_protocol.sign(record)
        record_protocol.verify(blob)
        elapsed = time.perf_counter() - start
        seconds.append(elapsed)
        rows.append(f"sample={i} bytes={len(blob.payload)} seconds={elapsed:.6e}")
    return BenchReport(seconds=tuple(seconds)), rows


def cmd_bench(args: argparse.Namespace) -> int:
    if args.samples < 1:
        print("medguard: --samples must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    seed = args.seed if args.seed is not None else _default_seed()
    report, rows = run_bench(args.samples, seed)
    for row in rows:
        print(row)
    print(f"samples={len(report.seconds)}")
    print(f"mean_seconds={report.mean:.6e}")
    print(f"stddev_seconds={report.stddev:.6e}")
    print(f"reference_mean_seconds={REFERENCE_MEAN_SECONDS:.1e}")
    print("# reference mean is informational; elapsed time depends on hardware and load")
    return EXIT_OK


_COMMANDS = {
    "hash": cmd_hash,
    "sign": cmd_sign,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "reliability": cmd_reliability,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except TamperDetected as exc:
        print(f"medguard: tampering detected: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (MalformedBlob, InvalidRecord, system_sim.ScriptError) as exc:
        print(f"medguard: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (AuthFailure, system_sim.Deny) as exc:
        print(f"medguard: not authorized: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except (reliability.SingularSystem, reliability.StepTooLarge) as exc:
        print(f"medguard: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
