"""Deterministic discrete-event network simulator with fail-stop faults.

Events sit in a heap keyed by ``(time, sequence)``; sequence numbers follow
generation order, so ties break the same way on every run. Message delays
are drawn uniformly from ``[min_delay, max_delay]`` by one seeded generator.
A failed node neither sends nor receives from its failure time on, and every
surviving agent learns of the failure ``max_delay`` later.
"""

from __future__ import annotations

import heapq
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .agent import (
    Agent,
    Delivery,
    FailureNotice,
    ImplementationInput,
    Start,
    Timer,
)
from .consensus import ConsensusInput
from .types import ErrorKind, NodeId
from .wire import MalformedMessage, decode, summarize


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n: int = 4
    ids: Optional[tuple[NodeId, ...]] = None
    adjacency: Optional[tuple[tuple[NodeId, NodeId], ...]] = None
    min_delay: int = 1
    max_delay: int = 1
    fault_schedule: tuple[tuple[int, NodeId], ...] = ()
    time_limit: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0 < self.min_delay <= self.max_delay:
            raise ConfigError("need 0 < min_delay <= max_delay")
        if self.n < 1:
            raise ConfigError("need at least one node")
        if self.ids is not None and (len(self.ids) != self.n or len(set(self.ids)) != self.n):
            raise ConfigError("ids must list n distinct node ids")
        known = set(self.node_ids)
        for t, x in self.fault_schedule:
            if x not in known or t < 0:
                raise ConfigError(f"bad fault event ({t}, {x})")

    @property
    def node_ids(self) -> tuple[NodeId, ...]:
        return tuple(sorted(self.ids)) if self.ids is not None else tuple(range(1, self.n + 1))


@dataclass(frozen=True)
class ScheduledInput:
    time: int
    node: NodeId
    round: int
    input: ConsensusInput


@dataclass(frozen=True)
class TraceRecord:
    time: int
    kind: str
    src: Optional[NodeId] = None
    dst: Optional[NodeId] = None
    nbytes: int = 0
    epoch: Optional[int] = None
    round: str = "-"
    summary: str = ""

    def to_line(self) -> str:
        def col(x):
            return "-" if x is None else str(x)

        summary = self.summary.replace("\t", " ").replace("\n", " ")
        return "\t".join((
            str(self.time), self.kind, col(self.src), col(self.dst),
            str(self.nbytes), col(self.epoch), self.round, summary,
        ))

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 8:
            raise ValueError(f"trace line has {len(parts)} fields, expected 8")

        def opt(x):
            return None if x == "-" else int(x)

        t, kind, src, dst, nbytes, epoch, rnd, summary = parts
        return cls(int(t), kind, opt(src), opt(dst), int(nbytes), opt(epoch), rnd, summary)


TRACE_HEADER = "# time\tkind\tsrc\tdst\tbytes\tepoch\tround\tsummary"


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    stuck: Optional[str] = None

    def to_text(self) -> str:
        lines = [TRACE_HEADER] + [r.to_line() for r in self.records]
        if self.stuck:
            lines.append(f"# stuck: {self.stuck}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Trace":
        records = []
        stuck = None
        for line in text.splitlines():
            if line.startswith("# stuck: "):
                stuck = line[len("# stuck: "):]
            elif line and not line.startswith("#"):
                records.append(TraceRecord.from_line(line))
        return cls(records, stuck)

    def of_kind(self, *kinds: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind in kinds]


def _signal_round(kind: ErrorKind, number: int) -> str:
    if kind in (ErrorKind.AGREEMENT, ErrorKind.VALIDITY):
        return f"consensus:{number}"
    if kind is ErrorKind.UNIQUENESS:
        return "uniqueness:0"
    return "structure:0"


_DELIVER, _INPUT, _TIMER, _FAIL, _NOTICE, _START = range(6)


class Simulator:
    def __init__(self, config: SimConfig, agents: Mapping[NodeId, Agent]) -> None:
        self.config = config
        self.agents = dict(agents)
        self.rng = random.Random(config.seed)
        self.failed_at: dict[NodeId, int] = {}
        self.trace = Trace()
        self._heap: list = []
        self._seq = 0
        self.now = 0

    def _push(self, time: int, code: int, data) -> None:
        heapq.heappush(self._heap, (time, self._seq, code, data))
        self._seq += 1

    def _dead(self, node: NodeId) -> bool:
        t = self.failed_at.get(node)
        return t is not None and t <= self.now

    def _record(self, **kw) -> None:
        self.trace.records.append(TraceRecord(self.now, **kw))

    def _apply(self, node: NodeId, eff) -> None:
        agent = self.agents[node]
        for dst, env in eff.sends:
            delay = self.rng.randint(self.config.min_delay, self.config.max_delay)
            try:
                summary = summarize(decode(env.payload))
            except MalformedMessage:
                summary = "malformed"
            self._record(kind="send", src=node, dst=dst, nbytes=len(env.payload),
                         epoch=env.epoch, round=f"{env.kind.value}:{env.round}", summary=summary)
            self._push(self.now + delay, _DELIVER, (node, dst, env))
        for sig in eff.signals:
            self._record(kind="signal", src=node, epoch=agent.epoch,
                         round=_signal_round(sig.kind, sig.round),
                         summary=f"{sig.kind.value}: {sig.detail}")
        for delay, token in eff.timers:
            self._push(self.now + delay, _TIMER, (node, token))
        for kind, detail in eff.notes:
            rnd = detail if kind in ("complete", "abort") else "-"
            self._record(kind=kind, src=node, epoch=agent.epoch, round=rnd, summary=detail)

    def _deliver(self, node: NodeId, event) -> None:
        self._apply(node, self.agents[node].receive(self.now, event))

    def run(self, workload: Iterable[ScheduledInput] = ()) -> Trace:
        # failures go in first so they precede anything else at the same instant
        by_time: dict[int, list[NodeId]] = defaultdict(list)
        for t, x in self.config.fault_schedule:
            by_time[t].append(x)
        for t in sorted(by_time):
            self._push(t, _FAIL, tuple(sorted(set(by_time[t]))))
        for node in sorted(self.agents):
            self._push(0, _START, node)
        for item in sorted(workload, key=lambda s: (s.time, s.round, s.node)):
            self._push(item.time, _INPUT, item)

        limit = self.config.time_limit
        while self._heap:
            if limit is not None and self._heap[0][0] > limit:
                self.trace.stuck = self._stuck_report(f"time limit {limit} reached")
                break
            self.now, _, code, data = heapq.heappop(self._heap)
            if code == _DELIVER:
                src, dst, env = data
                if self._dead(dst) or self._dead(src):
                    self._record(kind="lost", src=src, dst=dst, nbytes=len(env.payload),
                                 epoch=env.epoch, round=f"{env.kind.value}:{env.round}")
                    continue
                self._record(kind="deliver", src=src, dst=dst, nbytes=len(env.payload),
                             epoch=env.epoch, round=f"{env.kind.value}:{env.round}")
                self._deliver(dst, Delivery(src, env))
            elif code == _TIMER:
                node, token = data
                if not self._dead(node):
                    self._deliver(node, Timer(token))
            elif code == _INPUT:
                if self._dead(data.node):
                    continue
                self._record(kind="input", src=data.node, round=f"consensus:{data.round}",
                             summary=f"decision={data.input.decision.hex()} "
                                     f"proposals={len(data.input.proposals)}")
                self._deliver(data.node, ImplementationInput(data.round, data.input))
            elif code == _FAIL:
                fresh = [x for x in data if x not in self.failed_at]
                for x in fresh:
                    self.failed_at[x] = self.now
                    self._record(kind="fail", src=x)
                if fresh:
                    self._push(self.now + self.config.max_delay, _NOTICE, frozenset(fresh))
            elif code == _NOTICE:
                self._record(kind="notice", summary=",".join(map(str, sorted(data))))
                for node in sorted(self.agents):
                    if not self._dead(node):
                        self._deliver(node, FailureNotice(data))
            elif not self._dead(data):
                self._deliver(data, Start())
        return self.trace

    def _stuck_report(self, reason: str) -> str:
        waiting = []
        for node in sorted(self.agents):
            if self._dead(node):
                continue
            a = self.agents[node]
            open_rounds = [
                f"{k.value}:{num}" for (e, k, num), r in a._rounds.items()
                if e == a.epoch and r.entered and not r.fired
            ]
            if open_rounds:
                waiting.append(f"{node}[{','.join(open_rounds)}]")
        return f"{reason}; waiting: {' '.join(waiting) or 'none'}"


def run(config: SimConfig, agents: Mapping[NodeId, Agent], workload: Iterable[ScheduledInput] = ()) -> Trace:
    return Simulator(config, agents).run(workload)


@dataclass
class RoundMeter:
    messages: int = 0
    bytes: int = 0
    max_message: int = 0
    per_node: dict = field(default_factory=lambda: defaultdict(lambda: [0, 0]))
    by_type: dict = field(default_factory=lambda: defaultdict(int))

    def add(self, node: NodeId, nbytes: int, msg_type: str) -> None:
        self.messages += 1
        self.bytes += nbytes
        self.max_message = max(self.max_message, nbytes)
        self.per_node[node][0] += 1
        self.per_node[node][1] += nbytes
        self.by_type[msg_type] += 1

    def max_node_messages(self) -> int:
        return max((c for c, _ in self.per_node.values()), default=0)

    def max_node_bytes(self) -> int:
        return max((b for _, b in self.per_node.values()), default=0)


def meter(trace: Trace) -> dict[tuple[int, str], RoundMeter]:
    """Message counts and encoded bytes per ``(epoch, round)`` from sends."""
    out: dict[tuple[int, str], RoundMeter] = defaultdict(RoundMeter)
    for r in trace.records:
        if r.kind == "send":
            msg_type = r.summary.split("(", 1)[0]
            out[(r.epoch, r.round)].add(r.src, r.nbytes, msg_type)
    return dict(out)


def sends_after(trace: Trace, node: NodeId, time: int) -> int:
    return sum(1 for r in trace.records if r.kind == "send" and r.src == node and r.time >= time)
