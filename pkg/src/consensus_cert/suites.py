"""Randomized batches of scenarios and their aggregate verdicts."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace

from . import uniqueness as uq
from .digest import DEFAULT_WIDTH
from .harness import Classification, Outcome, Timeline, run_scenario
from .simnet import SimConfig
from .trees import build_tree, tree_from_parents
from .workload import Bug, BugKind, Scenario, random_scenario

SUITES = ("soundness", "completeness", "structure", "uniqueness", "efficiency", "failures")

TA = Classification.TRUE_ALARM
CP = Classification.CLEAN_PASS


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)   # (label, passed, detail)
    metrics: dict = field(default_factory=dict)

    def check(self, label: str, passed: bool, detail: str = "") -> None:
        self.checks.append((label, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def to_text(self) -> str:
        lines = [f"suite {self.name}"]
        for label, ok, detail in self.checks:
            lines.append(f"  {'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else ""))
        for k, v in self.metrics.items():
            lines.append(f"  {k}: {v}")
        lines.append(f"suite {self.name}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_records(self) -> list[dict]:
        out = [{"record": "check", "suite": self.name, "label": l, "passed": ok, "detail": d}
               for l, ok, d in self.checks]
        out.append({"record": "suite", "suite": self.name, "passed": self.passed, "metrics": self.metrics})
        return out


def soundness(n: int, iters: int, seed: int = 0, mode=uq.Mode.DETERMINISTIC,
              width: int = DEFAULT_WIDTH) -> SuiteResult:
    res = SuiteResult(f"soundness n={n}")
    for bug, prop in ((BugKind.DISAGREEMENT, "agreement"), (BugKind.INVALID_DECISION, "validity")):
        hits = 0
        bad = 0
        for i in range(iters):
            rep = run_scenario(random_scenario(seed + i, n, bug), mode, width).report
            if rep.result(prop, "round 1").classification is TA:
                hits += 1
            bad += rep.falsified
        res.check(f"{bug.value}: signalled in every run", hits == iters, f"{hits}/{iters}")
        res.check(f"{bug.value}: no false alarm or miss", bad == 0, f"{bad} falsified")
        res.metrics[f"{bug.value} true alarms"] = hits
    return res


def completeness(n: int, iters: int, seed: int = 0, mode=uq.Mode.DETERMINISTIC,
                 width: int = DEFAULT_WIDTH) -> SuiteResult:
    res = SuiteResult(f"completeness n={n}")
    signals = 0
    clean = 0
    for i in range(iters):
        rep = run_scenario(random_scenario(seed + i, n), mode, width).report
        signals += len(rep.signals)
        clean += all(r.classification is CP for r in rep.results)
    res.check("zero error signals", signals == 0, f"{signals} signals")
    res.check("every property CleanPass", clean == iters, f"{clean}/{iters}")
    return res


def structure(n: int, iters: int, seed: int = 0) -> SuiteResult:
    """Valid random trees pass; each defect class is caught every time."""
    res = SuiteResult(f"structure n<={n}")
    rng = random.Random(f"structure-suite:{seed}")
    valid_errors = 0
    for i in range(iters):
        size = rng.randint(1, n)
        rep = run_scenario(replace(random_scenario(seed + i, size, policy="random"), rounds=0)).report
        valid_errors += len(rep.signals)
    res.check("valid trees accepted", valid_errors == 0, f"{valid_errors} signals over {iters} trees")
    for bug in (BugKind.TREE_CYCLE, BugKind.TREE_FOREST, BugKind.TREE_OMIT_NODE, BugKind.TREE_DEPTH):
        caught = 0
        for i in range(iters):
            size = rng.randint(3, max(3, n))
            rep = run_scenario(replace(random_scenario(seed + i, size, bug), rounds=0)).report
            caught += rep.result("structure", "epoch 0").classification is TA
        res.check(f"{bug.value} detected", caught == iters, f"{caught}/{iters}")
    return res


def id_multisets(universe: int = 5, max_size: int = 5):
    for k in range(1, max_size + 1):
        yield from itertools.combinations_with_replacement(range(universe), k)


def membership_for(ids) -> tuple[int, ...]:
    """The k-member ID list that a run claiming ``ids`` was meant to have:
    the distinct claimed IDs topped up with the smallest unused ones."""
    members = sorted(set(ids))
    spare = (x for x in itertools.count() if x not in members)
    while len(members) < len(ids):
        members.append(next(spare))
    return tuple(sorted(members))


def uniqueness_exhaustive(mode=uq.Mode.DETERMINISTIC, universe: int = 5, max_size: int = 5,
                          policy: str = "line", seed: int = 0):
    """Yield ``(multiset, root verdict, has duplicate)`` for every ID multi-set.

    The network addresses are ``0..k-1``; each node claims one ID from the
    multi-set, and everyone holds the intended membership list.
    """
    for ms in id_multisets(universe, max_size):
        k = len(ms)
        members = membership_for(ms)
        base = build_tree(list(range(k)), policy, rng=random.Random(seed))
        parents = {x: t.parent_id for x, t in base.items()}
        trees = {x: replace(t, id=ms[x]) for x, t in tree_from_parents(parents, members).items()}
        sig = uq.certify_unique_ids(trees, mode, random.Random(f"{seed}:{ms}"))
        yield ms, sig is not None, len(set(ms)) != k


def uniqueness(n: int, iters: int, seed: int = 0) -> SuiteResult:
    res = SuiteResult("uniqueness")
    rows = list(uniqueness_exhaustive())
    agree = sum(flag == dup for _, flag, dup in rows)
    res.check("deterministic verdict equals duplicate oracle (exhaustive)", agree == len(rows),
              f"{agree}/{len(rows)} multi-sets")
    caught = 0
    for i in range(iters):
        sc = random_scenario(seed + i, n, BugKind.DUPLICATE_ID)
        rep = run_scenario(replace(sc, rounds=0), uq.Mode.ROOT_RANDOM).report
        caught += rep.result("uniqueness").classification is TA
    res.check(f"root-random mode catches every duplicate at n={n}", caught == iters, f"{caught}/{iters}")
    res.metrics["root-random miss bound"] = f"{uq.miss_probability(n):.3e}"
    return res


def fixed_scenario(n: int, decision: bytes, seed: int = 0, policy: str = "random") -> Scenario:
    ids = tuple(range(1, n + 1))
    return Scenario(SimConfig(seed=seed, n=n, ids=ids, min_delay=1, max_delay=2), decision,
                    {1: (decision,)}, policy, Bug(), 1, 0, f"fixed-n{n}")


def efficiency(n: int = 256, iters: int = 1, seed: int = 0) -> SuiteResult:
    res = SuiteResult("efficiency")
    sizes = [k for k in (4, 16, 64, 256) if k <= n] or [n]
    raw, dig = {}, {}
    for k in sizes:
        for i in range(iters):
            for decision, table in ((b"\x07" * 8, raw), (b"long-decision-" * 4, dig)):
                o = run_scenario(fixed_scenario(k, decision, seed + i))
                m = o.report.meter
                counts = set(m.consensus_messages.values())
                res.check(f"n={k}: {k - 1} messages per consensus round", counts == {k - 1}, str(counts))
                res.check(f"n={k}: one message per node per round", m.max_messages_per_node_round <= 1,
                          str(m.max_messages_per_node_round))
                table[k] = max(table.get(k, 0), m.max_combined_bytes)
                if decision in (b"\x07" * 8,) and k <= 64:
                    bound = 16 * (k + 1) + 12
                    res.check(f"n={k}: uniqueness bytes per node <= 16(n+1)+12",
                              m.uniqueness_max_node_bytes <= bound,
                              f"{m.uniqueness_max_node_bytes} <= {bound}")
    res.check("Combined size constant in n (8-byte raw)", len(set(raw.values())) == 1, str(raw))
    res.check("Combined size <= 43 with 32-byte digests", max(dig.values()) <= 43, str(dig))
    res.metrics["max Combined bytes (raw)"] = raw
    res.metrics["max Combined bytes (digest)"] = dig
    return res


def failure_scenario(n: int, failed, seed: int, bug: BugKind = BugKind.NONE,
                     when: str = "between", rounds: int = 3) -> Scenario:
    """Random scenario whose ``failed`` nodes stop around round 2."""
    base = random_scenario(seed, n, bug, rounds=rounds)
    tl = Timeline.for_scenario(base)
    if when == "between":
        t = tl.before_round(2)
    else:
        t = tl.round_start(2) + 1
    sim = replace(base.sim, fault_schedule=tuple((t, x) for x in failed))
    return replace(base, sim=sim, name=f"{base.name}-fail{len(failed)}-{when}")


def failures(n: int = 8, iters: int = 5, seed: int = 0) -> SuiteResult:
    res = SuiteResult(f"failures n={n}")
    for f in range(1, n):
        outcomes = []
        for i in range(iters):
            rng = random.Random(f"failures:{seed}:{f}:{i}")
            for bug in (BugKind.NONE, BugKind.DISAGREEMENT, BugKind.INVALID_DECISION):
                base = random_scenario(seed + i, n, bug)
                failed = rng.sample(base.ids, f)
                for when in ("between", "during"):
                    outcomes.append(run_scenario(failure_scenario(n, failed, seed + i, bug, when)))
        last_epoch_ok = all(
            [r for r in o.report.results if r.property == "structure"][-1].classification is CP
            for o in outcomes
        )
        falsified = sum(o.report.falsified for o in outcomes)
        after = sum(3 in o.report.rounds_completed for o in outcomes)
        res.check(f"f={f}: rebuilt tree certified", last_epoch_ok)
        res.check(f"f={f}: no false alarm or miss (alive nodes only)", falsified == 0, f"{falsified} falsified")
        res.check(f"f={f}: round after the failure completes", after == len(outcomes), f"{after}/{len(outcomes)}")
    return res


def gap_witnesses(n: int = 5, seed: int = 0) -> tuple[Outcome, Outcome]:
    """The two runs where failed nodes hide the truth from the certifier.

    First: the only node that proposed the decision fails before round 1,
    so the root raises a validity error although the value was proposed.
    Second: the only node that decided differently fails first, so nobody
    sees the disagreement.
    """
    ids = tuple(range(1, n + 1))
    sim = SimConfig(seed=seed, n=n, ids=ids, min_delay=1, max_delay=2)
    lone = ids[-1]
    probe = Scenario(sim, b"commit", {lone: (b"commit",)}, "random", Bug(), 1, 0)
    t = Timeline.for_scenario(probe).before_round(1)
    validity = replace(probe, sim=replace(sim, fault_schedule=((t, lone),)), name="gap-validity")
    agreement = replace(
        probe,
        sim=replace(sim, fault_schedule=((t, lone),)),
        proposals={ids[0]: (b"commit",)},
        bug=Bug(BugKind.DISAGREEMENT, node=lone, value=b"abort"),
        name="gap-agreement",
    )
    return run_scenario(validity), run_scenario(agreement)


def run_suite(name: str, n: int, iters: int, seed: int = 0, mode=uq.Mode.DETERMINISTIC,
              width: int = DEFAULT_WIDTH) -> SuiteResult:
    if name == "soundness":
        return soundness(n, iters, seed, mode, width)
    if name == "completeness":
        return completeness(n, iters, seed, mode, width)
    if name == "structure":
        return structure(n, iters, seed)
    if name == "uniqueness":
        return uniqueness(n, iters, seed)
    if name == "efficiency":
        return efficiency(n, iters, seed)
    if name == "failures":
        return failures(n, iters, seed)
    raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
