import json
import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_cert.harness import Classification, Timeline, classify, run_scenario
from consensus_cert.suites import gap_witnesses
from consensus_cert.workload import BugKind, random_scenario


@pytest.mark.parametrize(
    "signalled, holds, expected",
    [
        (True, False, Classification.TRUE_ALARM),
        (True, True, Classification.FALSE_ALARM),
        (False, False, Classification.MISSED_VIOLATION),
        (False, True, Classification.CLEAN_PASS),
    ],
)
def test_classify(signalled, holds, expected):
    assert classify(signalled, holds) is expected


def rederive(trace_text, scenario):
    """Consensus-round classifications from the raw trace text alone."""
    rows = [line.split("\t") for line in trace_text.splitlines() if line and line[0] != "#"]
    members = [set(scenario.ids)]
    done = {}
    sigs = Counter()
    for t, kind, src, dst, nbytes, epoch, rnd, summary in rows:
        if kind == "notice":
            members.append(members[-1] - {int(x) for x in summary.split(",")})
        elif kind == "complete" and rnd.startswith("consensus:"):
            done[int(rnd.split(":")[1])] = int(epoch)
        elif kind == "signal":
            sigs[(int(epoch), rnd, summary.split(":")[0])] += 1
    decisions = {x: scenario.decision for x in scenario.ids}
    bug = scenario.bug
    if bug.kind is BugKind.DISAGREEMENT:
        decisions[bug.node] = bug.value
    elif bug.kind is BugKind.INVALID_DECISION:
        decisions = {x: bug.value for x in scenario.ids}
    out = {}
    for r, e in done.items():
        alive = members[e]
        agree = len({decisions[x] for x in alive}) == 1
        valid = any(decisions[x] in scenario.proposals.get(x, ()) for x in alive)
        for prop, holds in (("agreement", agree), ("validity", valid)):
            s = sigs[(e, f"consensus:{r}", prop.capitalize())] > 0
            out[(prop, f"round {r}")] = {
                (True, False): "TrueAlarm", (True, True): "FalseAlarm",
                (False, False): "MissedViolation", (False, True): "CleanPass",
            }[(s, holds)]
    return out


@settings(max_examples=40)
@given(
    st.sampled_from([BugKind.NONE, BugKind.DISAGREEMENT, BugKind.INVALID_DECISION]),
    st.integers(2, 24),
    st.integers(0, 10**9),
    st.integers(0, 3),
)
def test_report_matches_independent_trace_parse(bug, n, seed, f):
    sc = random_scenario(seed, n, bug, rounds=3)
    rng = random.Random(seed)
    tl = Timeline.for_scenario(sc)
    f = min(f, n - 1)
    t = rng.choice([tl.before_round(2), tl.round_start(2) + 1])
    sc = replace(sc, sim=replace(sc.sim, fault_schedule=tuple((t, x) for x in rng.sample(sc.ids, f))))
    o = run_scenario(sc)
    expected = rederive(o.trace.to_text(), sc)
    got = {
        (r.property, r.scope): r.classification.value
        for r in o.report.results if r.property in ("agreement", "validity")
        and r.classification is not Classification.NOT_EVALUATED
    }
    assert got == expected
    assert "FalseAlarm" not in got.values() and "MissedViolation" not in got.values()


def test_gap_witnesses():
    validity, agreement = gap_witnesses()
    v = validity.report.result("validity", "round 1")
    assert (v.holds, v.holds_unrestricted, v.classification) == (False, True, Classification.TRUE_ALARM)
    assert v.signals >= 1
    a = agreement.report.result("agreement", "round 1")
    assert (a.holds, a.holds_unrestricted, a.classification) == (True, False, Classification.CLEAN_PASS)
    assert a.signals == 0
    assert validity.report.exit_status == agreement.report.exit_status == 0


def test_records_are_json_and_complete():
    o = run_scenario(random_scenario(1, 6, BugKind.DISAGREEMENT))
    recs = [json.loads(line) for line in o.report.to_jsonl().splitlines()]
    kinds = Counter(r["record"] for r in recs)
    assert kinds["scenario"] == 1 and kinds["meter"] == 1
    assert kinds["property"] == len(o.report.results)
    assert kinds["signal"] == len(o.report.signals) >= 1


def test_text_report_layout():
    text = run_scenario(random_scenario(1, 6, BugKind.INVALID_DECISION)).report.to_text()
    assert "validity    round 1" in text and "TrueAlarm" in text
    assert text.rstrip().endswith("certifier consistent with oracle")


def test_timeline_phases_do_not_overlap():
    sc = random_scenario(0, 10, rounds=3)
    tl = Timeline.for_scenario(sc)
    assert tl.before_round(2) > tl.round_start(1) + tl.phase_span
    assert tl.round_start(2) - tl.round_start(1) == tl.period


@settings(max_examples=80)
@given(st.sampled_from(list(BugKind)), st.integers(3, 30), st.integers(0, 10**9))
def test_no_bug_class_falsifies_the_certifier(bug, n, seed):
    o = run_scenario(random_scenario(seed, n, bug, rounds=2))
    assert not o.report.falsified, o.report.to_text()


def test_duplicate_of_a_child_address_is_not_a_structure_error():
    from consensus_cert.simnet import SimConfig
    from consensus_cert.workload import Bug, Scenario

    sim = SimConfig(n=4, ids=(1, 2, 3, 4))
    sc = Scenario(sim, b"d", {1: (b"d",)}, "line", Bug(BugKind.DUPLICATE_ID, node=3, id=4))
    rep = run_scenario(sc).report
    assert rep.result("structure", "epoch 0").classification is Classification.CLEAN_PASS
    assert rep.result("uniqueness").classification is Classification.TRUE_ALARM
