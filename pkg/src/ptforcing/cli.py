"""Command-line entry point: ``ptforcing {run,cohesive,check,cross}``.

Every ``run``/``cohesive`` flag may also come from an INI file given with
``--config``; the section is named after the subcommand and keys use the flag
names without dashes (``universe = 64``).  Flags given on the command line win.

Exit codes: 0 verified complete, 1 error, 2 Unresolved, 3 HypothesisViolated.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import random
import sys
from pathlib import Path

from .bitvec import BitString, GroundSets
from .driver import (
    EXIT_CODES,
    EXIT_ERROR,
    EXIT_OK,
    Schedule,
    Trace,
    check_trace,
    cohesive_construction,
    run_construction,
    verify_cohesive,
)
from .oracle import Registry
from .ptree import PartitionTree, cross_trees

RUN_KEYS = {
    "universe": int,
    "a": str,
    "c": str,
    "registry": str,
    "stages": int,
    "depth": int,
    "threshold": int,
    "domain_bound": int,
    "max_parts": int,
    "pairs": str,
    "trace": str,
}
COHESIVE_KEYS = {"universe": int, "c": str, "sets": str, "registry": str, "domain_bound": int}


def parse_bits(text: str, n: int, name: str) -> BitString:
    """``BITS`` literally, or ``random:SEED`` for a seeded random string of length ``n``."""
    if text.startswith("random:"):
        return BitString.random(n, random.Random(f"{name}:{text[7:]}"))
    bits = BitString.parse(text)
    if bits.length != n:
        raise ValueError(f"{name} has length {bits.length}, expected {n}")
    return bits


def parse_pairs(text: str) -> tuple[tuple[int, int], ...]:
    """``"0,1;2,3"`` → ``((0, 1), (2, 3))``."""
    out = []
    for item in text.split(";"):
        if item.strip():
            e, i = item.split(",")
            out.append((int(e), int(i)))
    return tuple(out)


def _merge_config(args: argparse.Namespace, keys: dict) -> None:
    if not args.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(args.config):
        raise FileNotFoundError(args.config)
    if not cp.has_section(args.command):
        return
    section = cp[args.command]
    for key, conv in keys.items():
        if getattr(args, key, None) is None and key in section:
            setattr(args, key, conv(section[key]))


def _cmd_run(args: argparse.Namespace) -> int:
    _merge_config(args, RUN_KEYS)
    if args.universe is None or args.registry is None:
        raise ValueError("run needs --universe and --registry")
    N = args.universe
    grounds = GroundSets(parse_bits(args.a or "random:0", N, "A"), parse_bits(args.c or "random:1", N, "C"))
    reg = Registry.loads(Path(args.registry).read_text(), N)
    depth = N if args.depth is None else args.depth
    stages = 4 if args.stages is None else args.stages
    kw = {
        "domain_bound": 3 if args.domain_bound is None else args.domain_bound,
        "threshold": args.threshold,
        "max_parts": 64 if args.max_parts is None else args.max_parts,
    }
    if args.pairs:
        schedule = Schedule(parse_pairs(args.pairs), stages - 1, depth, **kw)
    else:
        schedule = Schedule.standard(reg, stages, depth, **kw)
    trace = run_construction(grounds, reg, schedule)
    if args.trace:
        with open(args.trace, "w") as fp:
            trace.dump(fp)
    problems = check_trace(trace)
    summary = {
        "status": trace.status,
        "reason": trace.reason,
        "stages": len(trace.records),
        "chain": trace.chain,
        "G": None if trace.G is None else str(trace.G),
        "problems": problems,
    }
    if trace.records and "outcome" in trace.records[-1] and trace.status != "complete":
        summary["outcome"] = trace.records[-1]["outcome"]
    print(json.dumps(summary, indent=2))
    if problems:
        return EXIT_ERROR
    return EXIT_CODES[trace.status]


def _cmd_cohesive(args: argparse.Namespace) -> int:
    _merge_config(args, COHESIVE_KEYS)
    if args.sets is None or args.registry is None:
        raise ValueError("cohesive needs --sets and --registry")
    sets = [BitString.parse(line) for line in Path(args.sets).read_text().split() if line]
    if not sets:
        raise ValueError("no sets given")
    N = sets[0].length if args.universe is None else args.universe
    C = parse_bits(args.c or "random:1", N, "C")
    grounds = GroundSets(BitString.zeros(N), C)
    reg = Registry.loads(Path(args.registry).read_text(), N)
    bound = 3 if args.domain_bound is None else args.domain_bound
    result = cohesive_construction(sets, grounds, reg, bound)
    problems = verify_cohesive(result, sets, grounds, reg, bound)
    print(
        json.dumps(
            {"G": str(result.G), "stages": [s.to_json() for s in result.stages], "problems": problems},
            indent=2,
        )
    )
    return EXIT_ERROR if problems else EXIT_OK


def _cmd_check(args: argparse.Namespace) -> int:
    with open(args.trace) as fp:
        trace = Trace.load(fp)
    problems = check_trace(trace)
    print(json.dumps({"status": trace.status, "problems": problems}, indent=2))
    if problems:
        return EXIT_ERROR
    return EXIT_CODES.get(trace.status, EXIT_ERROR)


def _cmd_cross(args: argparse.Namespace) -> int:
    trees = [PartitionTree.loads(Path(f).read_text()) for f in args.trees]
    out = cross_trees(trees).dumps()
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptforcing", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full construction with trace and verification")
    run.add_argument("--config")
    run.add_argument("--universe", type=int)
    run.add_argument("--a", help="BITS or random:SEED")
    run.add_argument("--c", help="BITS or random:SEED")
    run.add_argument("--registry")
    run.add_argument("--stages", type=int)
    run.add_argument("--depth", type=int)
    run.add_argument("--threshold", type=int)
    run.add_argument("--domain-bound", dest="domain_bound", type=int)
    run.add_argument("--max-parts", dest="max_parts", type=int)
    run.add_argument("--pairs", help='explicit pair order, e.g. "0,1;2,3"')
    run.add_argument("--trace")
    run.set_defaults(func=_cmd_run)

    coh = sub.add_parser("cohesive", help="cohesive-set construction")
    coh.add_argument("--config")
    coh.add_argument("--sets", help="file with one bit string per line")
    coh.add_argument("--registry")
    coh.add_argument("--universe", type=int)
    coh.add_argument("--c", help="BITS or random:SEED")
    coh.add_argument("--domain-bound", dest="domain_bound", type=int)
    coh.set_defaults(func=_cmd_cohesive)

    chk = sub.add_parser("check", help="re-verify a recorded trace")
    chk.add_argument("--trace", required=True)
    chk.set_defaults(func=_cmd_check)

    cr = sub.add_parser("cross", help="Cross of partition trees given in text form")
    cr.add_argument("--trees", nargs="+", required=True)
    cr.add_argument("--out")
    cr.set_defaults(func=_cmd_cross)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
