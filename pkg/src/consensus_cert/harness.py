"""Run a scenario end to end and judge the certifier against the oracles.

The report is rebuilt from the trace alone (plus the scenario), so anyone
holding a saved trace can re-derive every classification.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import uniqueness as uq
from .agent import Agent, AgentConfig
from .digest import DEFAULT_WIDTH
from .simnet import ScheduledInput, Simulator, Trace, meter
from .trees import BuilderError
from .workload import (
    Generated,
    Scenario,
    base_tree,
    consensus_oracle,
    generate,
    ids_unique,
    structure_violations,
)


class Classification(str, enum.Enum):
    TRUE_ALARM = "TrueAlarm"
    FALSE_ALARM = "FalseAlarm"
    MISSED_VIOLATION = "MissedViolation"
    CLEAN_PASS = "CleanPass"
    NOT_EVALUATED = "NotEvaluated"


def classify(signalled: bool, holds: bool) -> Classification:
    if signalled:
        return Classification.FALSE_ALARM if holds else Classification.TRUE_ALARM
    return Classification.MISSED_VIOLATION if not holds else Classification.CLEAN_PASS


@dataclass(frozen=True)
class Timeline:
    """When rounds start, chosen so that no two phases overlap."""

    phase_span: int
    init_budget: int
    period: int
    jitter: int

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "Timeline":
        md = scenario.sim.max_delay
        n = scenario.sim.n
        gap = 4 * md + scenario.jitter
        span = gap * (n + 1) + 2 * md + 2
        return cls(span, 4 * span + n * md, 3 * span + scenario.jitter, scenario.jitter)

    def round_start(self, r: int) -> int:
        return self.init_budget + (r - 1) * self.period

    def before_round(self, r: int) -> int:
        """A moment after round ``r - 1`` (or start-up) settles and early
        enough for a tree rebuild to finish before round ``r``."""
        return self.round_start(r) - self.phase_span - 1


@dataclass
class PropertyResult:
    property: str
    scope: str
    holds: Optional[bool]
    signals: int
    classification: Classification
    holds_unrestricted: Optional[bool] = None
    note: str = ""


@dataclass
class MeterSummary:
    consensus_messages: dict = field(default_factory=dict)   # round label -> count
    max_messages_per_node_round: int = 0
    max_combined_bytes: int = 0
    uniqueness_max_node_bytes: int = 0
    uniqueness_max_node_messages: int = 0
    structure_max_node_messages: int = 0


@dataclass
class Report:
    scenario: str
    seed: int
    mode: str
    digest_width: int
    n: int
    signals: list = field(default_factory=list)
    results: list = field(default_factory=list)
    meter: MeterSummary = field(default_factory=MeterSummary)
    rounds_completed: list = field(default_factory=list)
    rounds_aborted: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    stuck: Optional[str] = None

    def result(self, prop: str, scope: Optional[str] = None) -> PropertyResult:
        for r in self.results:
            if r.property == prop and (scope is None or r.scope == scope):
                return r
        raise KeyError((prop, scope))

    def classifications(self, prop: str) -> list[Classification]:
        return [r.classification for r in self.results if r.property == prop]

    @property
    def falsified(self) -> bool:
        """True when the certifier itself is wrong for this run."""
        bad = (Classification.FALSE_ALARM, Classification.MISSED_VIOLATION)
        return any(r.classification in bad for r in self.results)

    @property
    def exit_status(self) -> int:
        return 1 if self.falsified else 0

    def to_records(self) -> list[dict]:
        head = {
            "record": "scenario", "scenario": self.scenario, "seed": self.seed,
            "mode": self.mode, "digest_width": self.digest_width, "n": self.n,
            "rounds_completed": self.rounds_completed, "rounds_aborted": self.rounds_aborted,
            "epochs": self.epochs, "stuck": self.stuck,
        }
        out = [head]
        out += [{"record": "signal", **s} for s in self.signals]
        for r in self.results:
            d = asdict(r)
            d["classification"] = r.classification.value
            out.append({"record": "property", **d})
        out.append({"record": "meter", **asdict(self.meter)})
        out += [{"record": "note", "text": t} for t in self.notes]
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    def to_text(self) -> str:
        lines = [
            f"scenario   {self.scenario}",
            f"seed       {self.seed}   n {self.n}   mode {self.mode}   digest {self.digest_width}",
            f"epochs     {' | '.join(self.epochs)}",
            f"rounds     completed {self.rounds_completed or '-'}   aborted {self.rounds_aborted or '-'}",
        ]
        if self.stuck:
            lines.append(f"stuck      {self.stuck}")
        lines.append("")
        lines.append(f"{'property':<12}{'scope':<12}{'holds':<8}{'unrestr.':<10}{'signals':<9}result")
        for r in self.results:
            holds = "-" if r.holds is None else str(r.holds).lower()
            unres = "-" if r.holds_unrestricted is None else str(r.holds_unrestricted).lower()
            lines.append(
                f"{r.property:<12}{r.scope:<12}{holds:<8}{unres:<10}{r.signals:<9}{r.classification.value}"
                + (f"  ({r.note})" if r.note else "")
            )
        m = self.meter
        lines += [
            "",
            f"messages   consensus per round {m.consensus_messages or '-'}   "
            f"max per node {m.max_messages_per_node_round}",
            f"bytes      max Combined {m.max_combined_bytes}   "
            f"uniqueness per node {m.uniqueness_max_node_bytes}",
        ]
        if self.signals:
            lines.append("")
            lines.append("signals")
            for s in self.signals:
                lines.append(f"  t={s['time']:<7} node={s['node']:<14} e={s['epoch']} {s['round']:<14} {s['text']}")
        for t in self.notes:
            lines.append(f"note: {t}")
        verdict = "certifier FALSIFIED" if self.falsified else "certifier consistent with oracle"
        lines.append("")
        lines.append(verdict)
        return "\n".join(lines) + "\n"


@dataclass
class Outcome:
    report: Report
    trace: Trace
    generated: Generated


def schedule_inputs(scenario: Scenario, gen: Generated, timeline: Timeline) -> list[ScheduledInput]:
    rng = random.Random(f"inputs:{scenario.sim.seed}")
    out = []
    for r in range(1, scenario.rounds + 1):
        base = timeline.round_start(r)
        for x in scenario.ids:
            t = base + (rng.randint(0, scenario.jitter) if scenario.jitter else 0)
            out.append(ScheduledInput(t, x, r, gen.inputs[x]))
    return out


def run_scenario(
    scenario: Scenario,
    mode: uq.Mode = uq.Mode.DETERMINISTIC,
    digest_width: int = DEFAULT_WIDTH,
    check_depth: bool = True,
) -> Outcome:
    gen = generate(scenario)
    cfg = AgentConfig(
        max_delay=scenario.sim.max_delay,
        jitter=scenario.jitter,
        mode=mode,
        digest_width=digest_width,
        policy=scenario.tree_policy,
        adjacency=scenario.sim.adjacency,
        seed=scenario.sim.seed,
        check_depth=check_depth,
    )
    ids = scenario.ids
    agents = {
        x: Agent(x, ids, gen.trees[x], cfg, random.Random(f"agent:{scenario.sim.seed}:{x}"))
        for x in ids
    }
    timeline = Timeline.for_scenario(scenario)
    trace = Simulator(scenario.sim, agents).run(schedule_inputs(scenario, gen, timeline))
    report = build_report(scenario, gen, trace, mode, digest_width)
    return Outcome(report, trace, gen)


def build_report(
    scenario: Scenario,
    gen: Generated,
    trace: Trace,
    mode: uq.Mode = uq.Mode.DETERMINISTIC,
    digest_width: int = DEFAULT_WIDTH,
) -> Report:
    ids = scenario.ids
    report = Report(scenario.name, scenario.sim.seed, mode.value, digest_width, len(ids), stuck=trace.stuck)

    # epoch k's members: everyone minus the first k failure notices
    members = [tuple(ids)]
    for r in trace.of_kind("notice"):
        gone = {int(x) for x in r.summary.split(",")}
        members.append(tuple(x for x in members[-1] if x not in gone))
    report.epochs = [f"{e}:{len(m)} nodes" for e, m in enumerate(members)]

    signals = trace.of_kind("signal")
    report.signals = [
        {"time": s.time, "node": s.src, "epoch": s.epoch, "round": s.round, "text": s.summary}
        for s in signals
    ]

    def sig_count(epoch: int, round_label: str, kinds: tuple[str, ...]) -> int:
        return sum(
            1 for s in signals
            if s.epoch == epoch and s.round == round_label and s.summary.split(":", 1)[0] in kinds
        )

    completes = {(r.epoch, r.round) for r in trace.of_kind("complete")}
    for r in trace.of_kind("builder-error"):
        if r.summary not in report.notes:
            report.notes.append(r.summary)

    # structure, one result per epoch
    epoch_trees = {0: gen.trees}
    for e in range(1, len(members)):
        try:
            epoch_trees[e] = base_tree(scenario, members[e], e)
        except BuilderError as exc:
            epoch_trees[e] = None
            report.notes.append(f"epoch {e}: {exc}")
    structure_ok = {}
    for e, m in enumerate(members):
        trees = epoch_trees[e]
        n_sig = sig_count(e, "structure:0", ("Structure", "Span"))
        if trees is None or (e, "structure:0") not in completes:
            structure_ok[e] = False
            report.results.append(PropertyResult(
                "structure", f"epoch {e}", None, n_sig, Classification.NOT_EVALUATED,
                note="no tree" if trees is None else "round did not complete",
            ))
            continue
        violations = structure_violations(trees, m)
        structure_ok[e] = not violations
        report.results.append(PropertyResult(
            "structure", f"epoch {e}", not violations, n_sig, classify(n_sig > 0, not violations),
            note="; ".join(violations[:3]),
        ))

    # uniqueness runs once, at start-up
    n_sig = sig_count(0, "uniqueness:0", ("Uniqueness",))
    if not structure_ok[0] or (0, "uniqueness:0") not in completes:
        report.results.append(PropertyResult(
            "uniqueness", "epoch 0", None, n_sig, Classification.NOT_EVALUATED,
            note="needs a certified tree",
        ))
    else:
        holds = ids_unique(gen.trees, members[0])
        report.results.append(PropertyResult(
            "uniqueness", "epoch 0", holds, n_sig, classify(n_sig > 0, holds)
        ))

    # consensus rounds
    done_in = {}
    for r in trace.of_kind("complete"):
        if r.round.startswith("consensus:"):
            done_in[int(r.round.split(":")[1])] = r.epoch
    aborted = {int(r.round.split(":")[1]) for r in trace.of_kind("abort") if r.round.startswith("consensus:")}
    for rnd in range(1, scenario.rounds + 1):
        label = f"consensus:{rnd}"
        if rnd not in done_in:
            if rnd in aborted:
                report.rounds_aborted.append(rnd)
            for prop in ("agreement", "validity"):
                report.results.append(PropertyResult(
                    prop, f"round {rnd}", None, 0, Classification.NOT_EVALUATED,
                    note="aborted" if rnd in aborted else "did not complete",
                ))
            continue
        e = done_in[rnd]
        report.rounds_completed.append(rnd)
        agree, valid = consensus_oracle(gen.inputs, members[e])
        agree_all, valid_all = consensus_oracle(gen.inputs, ids)
        for prop, holds, unres, kind in (
            ("agreement", agree, agree_all, "Agreement"),
            ("validity", valid, valid_all, "Validity"),
        ):
            n_sig = sig_count(e, label, (kind,))
            report.results.append(PropertyResult(
                prop, f"round {rnd}", holds, n_sig, classify(n_sig > 0, holds), unres,
                note="" if holds == unres else "differs once failed nodes are counted",
            ))

    report.meter = summarize_meter(trace)
    return report


def summarize_meter(trace: Trace) -> MeterSummary:
    m = MeterSummary()
    for (epoch, label), rm in sorted(meter(trace).items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if label.startswith("consensus:"):
            m.max_messages_per_node_round = max(m.max_messages_per_node_round, rm.max_node_messages())
            m.consensus_messages[f"e{epoch}/{label}"] = rm.messages
            m.max_combined_bytes = max(m.max_combined_bytes, rm.max_message)
        elif label.startswith("uniqueness:"):
            m.uniqueness_max_node_bytes = max(m.uniqueness_max_node_bytes, rm.max_node_bytes())
            m.uniqueness_max_node_messages = max(m.uniqueness_max_node_messages, rm.max_node_messages())
        else:
            m.structure_max_node_messages = max(m.structure_max_node_messages, rm.max_node_messages())
    return m
