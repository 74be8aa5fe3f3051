"""Per-node certification agent.

An agent is a single-threaded event handler. It receives one event at a time
(a delivered message, an input from the local consensus implementation, a
failure notice, a timer) and answers with :class:`~consensus_cert.types.Effects`:
messages to send, error signals to raise locally, timers to arm, and notes
for the trace.

Lifecycle per tree epoch: the structure round runs first; at start-up it is
followed by the uniqueness round. Consensus rounds are accepted once the
node's own structure step has passed. A failure notice aborts whatever is in
flight, drops the failed IDs, rebuilds the tree over the survivors and
re-runs the structure round only, since IDs do not change on failure.

Each round waits for one report per child. A node at depth ``d`` gives up
waiting after ``(4 * max_delay + jitter) * (n - d)`` time units, so a child's
deadline always falls well before its parent's. When reports are missing at
the deadline the agent suspects the silent children and allows one more
``max_delay + 1`` for a failure notice. If none arrives the child is alive
and silent, which in the structure and uniqueness rounds means the claimed
tree is wrong; consensus rounds instead stall without a verdict.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from . import uniqueness as uq
from .consensus import ConsensusInput, certify_consensus
from .digest import DEFAULT_WIDTH
from .structure import structure_check_local
from .trees import BuilderError, build_tree
from .types import Effects, ErrorKind, ErrorSignal, NodeId, TreeInput
from .wire import (
    ChallengeMsg,
    CombinedMsg,
    MalformedMessage,
    SetEqMsg,
    StructureMsg,
    decode,
    encode,
)


class Phase(enum.Enum):
    IDLE = "Idle"
    INITIALIZING = "Initializing"
    STRUCTURE_ROUND = "StructureRound"
    UNIQUENESS_ROUND = "UniquenessRound"
    CONSENSUS_ROUND = "ConsensusRound"
    AWAITING_TREE = "AwaitingTree"


class RoundKind(str, enum.Enum):
    STRUCTURE = "structure"
    UNIQUENESS = "uniqueness"
    CONSENSUS = "consensus"


@dataclass(frozen=True)
class Envelope:
    """Transport header around an encoded message.

    The epoch and round live here, outside the metered payload.
    """

    epoch: int
    kind: RoundKind
    round: int
    payload: bytes


@dataclass(frozen=True)
class Start:
    pass


@dataclass(frozen=True)
class Delivery:
    src: NodeId
    envelope: Envelope


@dataclass(frozen=True)
class ImplementationInput:
    round: int
    input: ConsensusInput


@dataclass(frozen=True)
class FailureNotice:
    failed: frozenset


@dataclass(frozen=True)
class Timer:
    token: tuple


Event = Union[Start, Delivery, ImplementationInput, FailureNotice, Timer]


@dataclass(frozen=True)
class AgentConfig:
    max_delay: int = 1
    jitter: int = 0
    mode: uq.Mode = uq.Mode.DETERMINISTIC
    digest_width: int = DEFAULT_WIDTH
    policy: str = "bfs"
    adjacency: Optional[tuple[tuple[NodeId, NodeId], ...]] = None
    seed: int = 0
    # mutation hook for tests; never disabled in normal runs
    check_depth: bool = True

    @property
    def level_gap(self) -> int:
        return 4 * self.max_delay + self.jitter

    @property
    def grace(self) -> int:
        return self.max_delay + 1


@dataclass
class _Round:
    kind: RoundKind
    number: int
    entered: bool = False
    fired: bool = False
    stalled: bool = False
    pending: dict = field(default_factory=dict)
    strays: list = field(default_factory=list)
    input: Optional[ConsensusInput] = None
    points: Optional[tuple[int, ...]] = None


class Agent:
    def __init__(
        self,
        node: NodeId,
        members: Sequence[NodeId],
        initial_tree: Optional[TreeInput],
        config: AgentConfig,
        rng: Optional[random.Random] = None,
    ) -> None:
        self.node = node
        self.config = config
        self.rng = rng or random.Random(node)
        self.alive = set(members)
        self.tree = initial_tree
        self.epoch = 0
        self.phase = Phase.IDLE
        self.ready = False
        self.structure_ok = False
        self._local_errors = False
        self._rounds: dict[tuple[int, RoundKind, int], _Round] = {}
        self._queued: dict[int, ConsensusInput] = {}

    # -- event entry point -------------------------------------------------

    def receive(self, now: int, event: Event) -> Effects:
        eff = Effects()
        if isinstance(event, Delivery):
            self._on_delivery(now, event.src, event.envelope, eff)
        elif isinstance(event, ImplementationInput):
            self._on_input(now, event.round, event.input, eff)
        elif isinstance(event, Timer):
            self._on_timer(now, event.token, eff)
        elif isinstance(event, FailureNotice):
            self._on_failure(now, event.failed, eff)
        elif isinstance(event, Start):
            self.phase = Phase.INITIALIZING
            self._begin_epoch(now, eff)
        else:
            raise TypeError(f"unknown event {event!r}")
        return eff

    # -- helpers -------------------------------------------------------------

    def _round(self, kind: RoundKind, number: int, epoch: Optional[int] = None) -> _Round:
        key = (self.epoch if epoch is None else epoch, kind, number)
        rnd = self._rounds.get(key)
        if rnd is None:
            rnd = self._rounds[key] = _Round(kind, number)
        return rnd

    def _signal(self, eff: Effects, kind: ErrorKind, detail: str, round_no: int = 0) -> None:
        eff.signals.append(ErrorSignal(self.node, round_no, kind, detail))

    def _relay(self, eff: Effects, sig: ErrorSignal) -> None:
        eff.signals.append(ErrorSignal(self.node, sig.round, sig.kind, sig.detail))

    def _send(self, eff: Effects, dst: NodeId, kind: RoundKind, number: int, msg) -> None:
        eff.sends.append((dst, Envelope(self.epoch, kind, number, encode(msg))))

    def _deadline(self, eff: Effects, rnd: _Round) -> None:
        tree = self.tree
        levels = max(1, tree.n - tree.depth)
        span = self.config.level_gap * levels
        if rnd.kind is RoundKind.CONSENSUS:
            span += self.config.jitter
        eff.timers.append((span, (self.epoch, rnd.kind, rnd.number, "deadline")))

    def _missing(self, rnd: _Round) -> list[NodeId]:
        return [c for c in self.tree.children if c not in rnd.pending]

    # -- epochs ------------------------------------------------------------

    def _begin_epoch(self, now: int, eff: Effects) -> None:
        self.ready = False
        self.structure_ok = False
        if self.tree is None:
            self.phase = Phase.AWAITING_TREE
            eff.notes.append(("no-tree", f"epoch={self.epoch}"))
            return
        self.phase = Phase.STRUCTURE_ROUND
        local = self.tree.local_violations()
        # edges join addresses; the claimed id is not trusted yet
        if self.node in self.tree.children or self.node == self.tree.parent_id:
            local.append((ErrorKind.STRUCTURE, "tree names this node as its own neighbour"))
        self._local_errors = bool(local)
        for kind, detail in local:
            self._signal(eff, kind, f"input: {detail}")
        rnd = self._round(RoundKind.STRUCTURE, 0)
        rnd.entered = True
        self._deadline(eff, rnd)
        self._try_fire(now, rnd, eff)

    def _on_failure(self, now: int, failed: frozenset, eff: Effects) -> None:
        newly = set(failed) & self.alive
        if not newly:
            return
        for (epoch, kind, number), rnd in self._rounds.items():
            if epoch == self.epoch and rnd.entered and not rnd.fired:
                eff.notes.append(("abort", f"{kind.value}:{number}"))
        for number in sorted(self._queued):
            eff.notes.append(("abort", f"consensus:{number}"))
        self._rounds = {k: r for k, r in self._rounds.items() if k[0] > self.epoch}
        self._queued.clear()
        self.alive -= newly
        self.epoch += 1
        try:
            rng = random.Random(f"{self.config.seed}:{self.epoch}")
            trees = build_tree(sorted(self.alive), self.config.policy, self.config.adjacency, rng)
            self.tree = trees[self.node]
        except BuilderError as exc:
            self.tree = None
            eff.notes.append(("builder-error", str(exc)))
        self._begin_epoch(now, eff)

    def _finish_init(self, now: int, eff: Effects) -> None:
        self.ready = True
        self.phase = Phase.IDLE
        queued, self._queued = self._queued, {}
        for number in sorted(queued):
            self._start_consensus(now, number, queued[number], eff)

    # -- inbound -------------------------------------------------------------

    def _on_delivery(self, now: int, src: NodeId, env: Envelope, eff: Effects) -> None:
        if env.epoch < self.epoch:
            eff.notes.append(("drop", f"stale epoch {env.epoch} from {src}"))
            return
        if self.tree is None and env.epoch == self.epoch:
            eff.notes.append(("drop", f"no tree; message from {src}"))
            return
        try:
            msg = decode(env.payload)
        except MalformedMessage as exc:
            eff.notes.append(("drop", f"malformed from {src}: {exc}"))
            return
        rnd = self._round(env.kind, env.round, env.epoch)
        if isinstance(msg, ChallengeMsg):
            if env.epoch == self.epoch and src != self.tree.parent_id:
                eff.notes.append(("drop", f"challenge from non-parent {src}"))
                return
            if rnd.points is None:
                rnd.points = tuple(msg.points)
                if rnd.entered and env.epoch == self.epoch:
                    self._activate_uniqueness(now, rnd, eff)
            return
        expected = {
            RoundKind.STRUCTURE: StructureMsg,
            RoundKind.UNIQUENESS: SetEqMsg,
            RoundKind.CONSENSUS: CombinedMsg,
        }[env.kind]
        if not isinstance(msg, expected):
            eff.notes.append(("drop", f"{type(msg).__name__} in {env.kind.value} round from {src}"))
            return
        if env.epoch == self.epoch and src not in self.tree.children:
            rnd.strays.append(src)
            eff.notes.append(("drop", f"report from non-child {src}"))
            return
        if src in rnd.pending:
            eff.notes.append(("drop", f"duplicate report from {src}"))
            return
        rnd.pending[src] = msg
        if env.epoch == self.epoch:
            self._try_fire(now, rnd, eff)

    def _on_input(self, now: int, number: int, inp: ConsensusInput, eff: Effects) -> None:
        if self.tree is None:
            eff.notes.append(("skip", f"consensus:{number} no tree"))
            return
        if not self.ready:
            self._queued[number] = inp
            return
        self._start_consensus(now, number, inp, eff)

    def _start_consensus(self, now: int, number: int, inp: ConsensusInput, eff: Effects) -> None:
        if not self.structure_ok:
            eff.notes.append(("skip", f"consensus:{number} structure not certified here"))
            return
        rnd = self._round(RoundKind.CONSENSUS, number)
        if rnd.input is not None:
            return
        rnd.input = inp
        rnd.entered = True
        self.phase = Phase.CONSENSUS_ROUND
        self._deadline(eff, rnd)
        self._try_fire(now, rnd, eff)

    def _on_timer(self, now: int, token: tuple, eff: Effects) -> None:
        epoch, kind, number, stage = token
        if epoch != self.epoch:
            return
        rnd = self._rounds.get((epoch, kind, number))
        if rnd is None or rnd.fired or rnd.stalled:
            return
        missing = self._missing(rnd)
        if not missing:
            return
        if stage == "deadline":
            for c in missing:
                eff.notes.append(("suspect", str(c)))
            eff.timers.append((self.config.grace, (epoch, kind, number, "grace")))
        elif kind is RoundKind.CONSENSUS:
            rnd.stalled = True
            eff.notes.append(("stalled", f"consensus:{number} missing {missing}"))
        else:
            self._fire(now, rnd, eff, missing)

    # -- round steps ---------------------------------------------------------

    def _try_fire(self, now: int, rnd: _Round, eff: Effects) -> None:
        if rnd.fired or not rnd.entered:
            return
        if rnd.kind is RoundKind.UNIQUENESS and rnd.points is None:
            return
        if rnd.kind is RoundKind.CONSENSUS and rnd.input is None:
            return
        if all(c in rnd.pending for c in self.tree.children):
            self._fire(now, rnd, eff, [])

    def _fire(self, now: int, rnd: _Round, eff: Effects, missing: list[NodeId]) -> None:
        rnd.fired = True
        tree = self.tree
        present = [c for c in tree.children if c in rnd.pending]
        msgs = [rnd.pending[c] for c in present]
        done = ("complete", f"{rnd.kind.value}:{rnd.number}")

        if rnd.kind is RoundKind.STRUCTURE:
            out, verdict = structure_check_local(tree, msgs, 0, self.config.check_depth)
            for sig in verdict.errors:
                self._relay(eff, sig)
            for src in rnd.strays:
                self._signal(eff, ErrorKind.STRUCTURE, f"report from {src}, which is not a listed child")
            for c in missing:
                self._signal(eff, ErrorKind.STRUCTURE, f"no structure report from live child {c}")
            self.structure_ok = not (verdict.errors or rnd.strays or missing or self._local_errors)
            if out is not None:
                self._send(eff, tree.parent_id, RoundKind.STRUCTURE, 0, out)
            else:
                eff.notes.append(done)
            if self.epoch == 0:
                self._open_uniqueness(now, eff)
            else:
                self._finish_init(now, eff)

        elif rnd.kind is RoundKind.UNIQUENESS:
            try:
                state = uq.EqualityRoundState.for_node(tree, rnd.points)
            except uq.InputIntegrityError:
                # already signalled as an input error; contribute a neutral factor
                state = uq.EqualityRoundState(rnd.points, tree.id, tree.id)
            pairs = uq.batch_step(state, msgs)
            for c in missing:
                self._signal(eff, ErrorKind.UNIQUENESS, f"no product from live child {c}")
            if tree.is_root:
                if self.structure_ok and not missing:
                    sig = uq.root_check(pairs, self.node)
                    if sig is not None:
                        eff.signals.append(sig)
                else:
                    eff.notes.append(("skip", "uniqueness verdict: structure not certified"))
                eff.notes.append(done)
            else:
                self._send(eff, tree.parent_id, RoundKind.UNIQUENESS, 0, SetEqMsg(pairs))
            self._finish_init(now, eff)

        else:
            out, errors = certify_consensus(tree, rnd.input, msgs, rnd.number, self.config.digest_width)
            for sig in errors:
                self._relay(eff, sig)
            if out is not None:
                self._send(eff, tree.parent_id, RoundKind.CONSENSUS, rnd.number, out)
            else:
                eff.notes.append(done)
            if not any(r.entered and not r.fired for r in self._rounds.values()):
                self.phase = Phase.IDLE

    def _open_uniqueness(self, now: int, eff: Effects) -> None:
        self.phase = Phase.UNIQUENESS_ROUND
        rnd = self._round(RoundKind.UNIQUENESS, 0)
        rnd.entered = True
        if self.config.mode is uq.Mode.DETERMINISTIC:
            rnd.points = uq.deterministic_points(self.tree.n)
        elif self.tree.is_root:
            rnd.points = uq.random_points(self.rng)
        if rnd.points is not None:
            self._activate_uniqueness(now, rnd, eff)

    def _activate_uniqueness(self, now: int, rnd: _Round, eff: Effects) -> None:
        if self.config.mode is uq.Mode.ROOT_RANDOM:
            for c in self.tree.children:
                self._send(eff, c, RoundKind.UNIQUENESS, 0, ChallengeMsg(rnd.points))
        self._deadline(eff, rnd)
        self._try_fire(now, rnd, eff)
