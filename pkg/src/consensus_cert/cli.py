"""Command-line runner.

Scenario files are line-oriented ``key = value`` text in four sections::

    # a disagreement on a five-node line
    [sim]
    name = line-disagreement
    seed = 7
    n = 5
    ids = 1, 2, 3, 4, 5          # optional, defaults to 1..n
    min_delay = 1
    max_delay = 3
    jitter = 0
    rounds = 1
    adjacency = complete         # or edges: 1-2, 2-3, 3-4
    fail = before-round-2:4, 950:5
    time_limit = 100000

    [tree]
    policy = bfs                 # bfs | star | line | random

    [bug]
    kind = disagreement          # none | disagreement | invalid-decision |
    node = 3                     # duplicate-id | tree-cycle | tree-forest |
    value = abort                # tree-omit-node | tree-depth
    id = 2                       # duplicate-id only

    [proposals]
    decision = commit
    1 = commit, abort
    4 = commit

Values are UTF-8 text, or ``hex:`` followed by hex digits. Fail times are
absolute, or ``before-round-R`` / ``during-round-R`` relative to the run's
timeline. ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

from . import uniqueness as uq
from .digest import DIGEST_WIDTHS
from .harness import Timeline, run_scenario
from .simnet import ConfigError, SimConfig
from .suites import SUITES, run_suite
from .workload import Bug, BugKind, Scenario, ScenarioError

SECTIONS = {
    "sim": {"name", "seed", "n", "ids", "min_delay", "max_delay", "jitter", "rounds",
            "adjacency", "fail", "time_limit"},
    "tree": {"policy"},
    "bug": {"kind", "node", "value", "id"},
}


class ScenarioParseError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_value(text: str) -> bytes:
    if text.startswith("hex:"):
        return bytes.fromhex(text[4:])
    return text.encode()


def _int(lineno: int, key: str, text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise ScenarioParseError(lineno, f"{key} must be an integer, got {text!r}") from None


def _list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def parse_scenario(text: str) -> Scenario:
    section: Optional[str] = None
    fields: dict[str, dict[str, tuple[int, str]]] = {"sim": {}, "tree": {}, "bug": {}}
    proposals: dict[int, tuple[bytes, ...]] = {}
    decision: Optional[bytes] = None
    seen_sections = set()

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in (*SECTIONS, "proposals"):
                raise ScenarioParseError(lineno, f"unknown section [{section}]")
            seen_sections.add(section)
            continue
        if "=" not in line:
            raise ScenarioParseError(lineno, "expected key = value")
        if section is None:
            raise ScenarioParseError(lineno, "key outside any section")
        key, value = (x.strip() for x in line.split("=", 1))
        if section == "proposals":
            if key == "decision":
                decision = parse_value(value)
            else:
                node = _int(lineno, "proposal node", key)
                proposals[node] = tuple(parse_value(v) for v in _list(value))
            continue
        if key not in SECTIONS[section]:
            raise ScenarioParseError(lineno, f"unknown key {key!r} in [{section}]")
        if key in fields[section]:
            raise ScenarioParseError(lineno, f"duplicate key {key!r}")
        fields[section][key] = (lineno, value)

    if "sim" not in seen_sections:
        raise ScenarioParseError(1, "missing [sim] section")
    if decision is None:
        raise ScenarioParseError(1, "missing decision in [proposals]")

    sim = fields["sim"]

    def get_int(key: str, default: int) -> int:
        if key not in sim:
            return default
        lineno, value = sim[key]
        return _int(lineno, key, value)

    if "n" not in sim and "ids" not in sim:
        raise ScenarioParseError(1, "[sim] needs n or ids")
    ids = None
    if "ids" in sim:
        lineno, value = sim["ids"]
        ids = tuple(_int(lineno, "ids", x) for x in _list(value))
    n = get_int("n", len(ids) if ids else 0)
    adjacency = None
    if "adjacency" in sim and sim["adjacency"][1] != "complete":
        lineno, value = sim["adjacency"]
        edges = []
        for item in _list(value):
            a, sep, b = item.partition("-")
            if not sep:
                raise ScenarioParseError(lineno, f"edge {item!r} must look like a-b")
            edges.append((_int(lineno, "edge", a), _int(lineno, "edge", b)))
        adjacency = tuple(edges)
    time_limit = get_int("time_limit", 0) or None
    try:
        config = SimConfig(
            seed=get_int("seed", 0), n=n, ids=ids, adjacency=adjacency,
            min_delay=get_int("min_delay", 1), max_delay=get_int("max_delay", 1),
            time_limit=time_limit,
        )
    except ConfigError as exc:
        raise ScenarioParseError(sim.get("n", (1, ""))[0], str(exc)) from None

    tree = fields["tree"]
    policy = tree["policy"][1] if "policy" in tree else "bfs"

    b = fields["bug"]
    bug = Bug()
    if "kind" in b:
        lineno, kind = b["kind"]
        try:
            bug_kind = BugKind(kind)
        except ValueError:
            raise ScenarioParseError(lineno, f"unknown bug kind {kind!r}") from None
        bug = Bug(
            bug_kind,
            node=_int(b["node"][0], "node", b["node"][1]) if "node" in b else None,
            value=parse_value(b["value"][1]) if "value" in b else None,
            id=_int(b["id"][0], "id", b["id"][1]) if "id" in b else None,
        )

    scenario = Scenario(
        config, decision, proposals, policy, bug,
        rounds=get_int("rounds", 1), jitter=get_int("jitter", 0),
        name=sim["name"][1] if "name" in sim else "scenario",
    )

    if "fail" in sim:
        lineno, value = sim["fail"]
        timeline = Timeline.for_scenario(scenario)
        schedule = []
        for item in _list(value):
            when, sep, node = item.rpartition(":")
            if not sep:
                raise ScenarioParseError(lineno, f"fail entry {item!r} must look like time:node")
            if when.startswith("before-round-"):
                t = timeline.before_round(_int(lineno, "round", when[len("before-round-"):]))
            elif when.startswith("during-round-"):
                t = timeline.round_start(_int(lineno, "round", when[len("during-round-"):])) + 1
            else:
                t = _int(lineno, "fail time", when)
            schedule.append((t, _int(lineno, "fail node", node)))
        try:
            scenario = replace(scenario, sim=replace(config, fault_schedule=tuple(schedule)))
        except ConfigError as exc:
            raise ScenarioParseError(lineno, str(exc)) from None
    return scenario


def _mode(text: str) -> uq.Mode:
    return uq.Mode(text)


def _emit_records(records, args) -> None:
    text = "".join(json.dumps(r, sort_keys=True, default=str) + "\n" for r in records)
    if args.records_out:
        with open(args.records_out, "w") as fh:
            fh.write(text)
    if args.jsonl:
        sys.stdout.write(text)


def cmd_run_scenario(args) -> int:
    try:
        with open(args.path) as fh:
            scenario = parse_scenario(fh.read())
        if args.seed is not None:
            scenario = replace(scenario, sim=replace(scenario.sim, seed=args.seed))
        outcome = run_scenario(scenario, args.mode, args.digest_width)
    except ScenarioParseError as exc:
        print(f"{args.path}: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"{args.path}: invalid scenario: {exc}", file=sys.stderr)
        return 2
    if args.trace_out:
        with open(args.trace_out, "w") as fh:
            fh.write(outcome.trace.to_text())
    if not args.jsonl:
        sys.stdout.write(outcome.report.to_text())
    _emit_records(outcome.report.to_records(), args)
    return outcome.report.exit_status


def cmd_run_suite(args) -> int:
    result = run_suite(args.name, args.n, args.iters, args.seed, args.mode, args.digest_width)
    if not args.jsonl:
        sys.stdout.write(result.to_text())
    _emit_records(result.to_records(), args)
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="consensus-cert", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--mode", type=_mode, default=uq.Mode.DETERMINISTIC,
                       metavar="{deterministic,root-random}", help="uniqueness evaluation points")
        p.add_argument("--digest-width", type=int, choices=DIGEST_WIDTHS, default=32)
        p.add_argument("--records-out", help="write line-delimited JSON records here")
        p.add_argument("--jsonl", action="store_true", help="print JSON records instead of text")

    p = sub.add_parser("run-scenario", help="run one scenario file")
    p.add_argument("path")
    p.add_argument("--seed", type=int, help="override the scenario's seed")
    p.add_argument("--trace-out", help="write the event trace here")
    common(p)
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("run-suite", help="run a randomized batch")
    p.add_argument("name", choices=SUITES)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_run_suite)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
