"""Acceptance criteria at full scale.

Each criterion prints one ``PASS``/``FAIL`` line; under pytest the lines are
collected into the terminal summary. Run directly with
``python tests/test_acceptance.py`` to print just those lines.
"""

import os
import random
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import pytest

from consensus_cert import uniqueness as uq
from consensus_cert.harness import Classification, run_scenario
from consensus_cert.suites import efficiency, failures, gap_witnesses, uniqueness_exhaustive
from consensus_cert.workload import BugKind, random_scenario

pytestmark = pytest.mark.acceptance

RESULTS = []
ROOT = Path(__file__).resolve().parent.parent
TA = Classification.TRUE_ALARM
CP = Classification.CLEAN_PASS


def record(number, title, ok, detail):
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}  [{detail}]"
    RESULTS.append(line)
    print(line)
    return ok


def criterion_1():
    start = time.perf_counter()
    misses = []
    falsified = 0
    for n in (4, 16, 64):
        for bug, prop in ((BugKind.DISAGREEMENT, "agreement"), (BugKind.INVALID_DECISION, "validity")):
            for seed in range(1000):
                rep = run_scenario(random_scenario(seed, n, bug)).report
                r = rep.result(prop, "round 1")
                if r.signals == 0 or r.classification is not TA:
                    misses.append((n, bug.value, seed))
                falsified += rep.falsified
    elapsed = time.perf_counter() - start
    ok = not misses and not falsified and elapsed < 60
    return record(1, "soundness", ok,
                  f"6000 runs, {len(misses)} without a signal, {falsified} falsified, {elapsed:.1f}s of 60s")


def criterion_2():
    signals = 0
    for n in (4, 16, 64):
        for seed in range(1000):
            signals += len(run_scenario(random_scenario(seed, n)).report.signals)
    return record(2, "completeness", signals == 0, f"3000 correct runs, {signals} signals")


def criterion_3():
    rng = random.Random("acceptance-structure")
    valid_errors = 0
    for seed in range(1000):
        sc = replace(random_scenario(seed, rng.randint(1, 64), policy="random"), rounds=0)
        valid_errors += len(run_scenario(sc).report.signals)
    caught = {}
    for bug in (BugKind.TREE_CYCLE, BugKind.TREE_FOREST, BugKind.TREE_OMIT_NODE):
        hits = 0
        for seed in range(1000):
            sc = replace(random_scenario(seed, rng.randint(3, 64), bug), rounds=0)
            rep = run_scenario(sc).report
            hits += len(rep.signals) >= 1 and rep.result("structure", "epoch 0").classification is TA
        caught[bug.value] = hits
    ok = valid_errors == 0 and all(v == 1000 for v in caught.values())
    detail = f"valid trees: {valid_errors} errors; " + ", ".join(f"{k} {v}/1000" for k, v in caught.items())
    return record(3, "structure", ok, detail)


def criterion_4():
    rows = list(uniqueness_exhaustive())
    agree = sum(flagged == (len(set(ms)) != len(ms)) for ms, flagged, _ in rows)
    caught = 0
    for seed in range(1000):
        sc = replace(random_scenario(seed, 64, BugKind.DUPLICATE_ID), rounds=0)
        caught += run_scenario(sc, uq.Mode.ROOT_RANDOM).report.result("uniqueness").classification is TA
    bound = uq.miss_probability(64)
    ok = agree == len(rows) and caught == 1000 and bound <= (64 / (2**61 - 1)) ** 3
    return record(4, "uniqueness", ok,
                  f"exhaustive {agree}/{len(rows)}, root-random {caught}/1000 at n=64, miss bound {bound:.2e}")


def criterion_5():
    bad = []
    rounds = 0
    for n in (4, 16, 64, 256):
        for seed in range(25):
            for bug in (BugKind.NONE, BugKind.DISAGREEMENT, BugKind.INVALID_DECISION):
                m = run_scenario(random_scenario(seed, n, bug, rounds=3)).report.meter
                for label, count in m.consensus_messages.items():
                    rounds += 1
                    if count != n - 1:
                        bad.append((n, seed, label, count))
                if m.max_messages_per_node_round != 1:
                    bad.append((n, seed, "per-node", m.max_messages_per_node_round))
    return record(5, "message count", not bad and rounds == 4 * 25 * 3 * 3,
                  f"{rounds} consensus rounds, {len(bad)} with a count other than n-1")


def criterion_6():
    res = efficiency(256, 3)
    raw = res.metrics["max Combined bytes (raw)"]
    dig = res.metrics["max Combined bytes (digest)"]
    return record(6, "message size", res.passed,
                  f"raw {raw}, digest {dig}, {sum(ok for _, ok, _ in res.checks)}/{len(res.checks)} checks")


def criterion_7():
    res = failures(8, 10)
    failed = [label for label, ok, _ in res.checks if not ok]
    return record(7, "fail-stop", res.passed,
                  f"f=1..7, {len(res.checks)} checks, {len(failed)} failed" + (f": {failed[:3]}" if failed else ""))


def criterion_8():
    validity, agreement = gap_witnesses()
    v = validity.report.result("validity", "round 1")
    a = agreement.report.result("agreement", "round 1")
    ok = (
        v.signals > 0 and v.holds_unrestricted is True and v.holds is False and v.classification is TA
        and a.signals == 0 and a.holds_unrestricted is False and a.holds is True and a.classification is CP
    )
    return record(8, "failure gap witnesses", ok,
                  f"validity run {v.classification.value} with {v.signals} signal(s); "
                  f"agreement run {a.classification.value} with {a.signals} signal(s)")


def _cli(args, hashseed):
    env = {**os.environ, "PYTHONHASHSEED": str(hashseed)}
    out = subprocess.run([sys.executable, "-m", "consensus_cert", *args], env=env,
                         capture_output=True, text=True, cwd=ROOT)
    return out.returncode, out.stdout


def criterion_9(tmp):
    mismatches = []
    for seed in range(40):
        rng = random.Random(seed)
        bug = rng.choice(list(BugKind))
        sc = random_scenario(seed, rng.randint(3, 24), bug, rounds=3)
        if rng.random() < 0.5:
            t = rng.randint(0, 3000)
            sc = replace(sc, sim=replace(sc.sim, fault_schedule=((t, rng.choice(sc.ids)),)))
        mode = rng.choice(list(uq.Mode))
        a, b = run_scenario(sc, mode), run_scenario(sc, mode)
        if a.trace.to_text() != b.trace.to_text() or a.report.to_jsonl() != b.report.to_jsonl():
            mismatches.append(sc.name)
    # separate processes with different hash seeds
    for path in sorted((ROOT / "scenarios").glob("*.scn")):
        outs = []
        for hs in (0, 12345):
            trace = Path(tmp) / f"{path.stem}-{hs}.tsv"
            code, text = _cli(["run-scenario", str(path), "--trace-out", str(trace)], hs)
            outs.append((code, text, trace.read_bytes()))
        if outs[0] != outs[1]:
            mismatches.append(path.name)
    return record(9, "determinism", not mismatches,
                  f"40 in-process reruns and {len(list((ROOT / 'scenarios').glob('*.scn')))} "
                  f"cross-process reruns, {len(mismatches)} differ")


def test_criterion_1_soundness():
    assert criterion_1()


def test_criterion_2_completeness():
    assert criterion_2()


def test_criterion_3_structure():
    assert criterion_3()


def test_criterion_4_uniqueness():
    assert criterion_4()


def test_criterion_5_message_count():
    assert criterion_5()


def test_criterion_6_message_size():
    assert criterion_6()


def test_criterion_7_fail_stop():
    assert criterion_7()


def test_criterion_8_gap_witnesses():
    assert criterion_8()


def test_criterion_9_determinism(tmp_path):
    assert criterion_9(tmp_path)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        checks = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                  criterion_6, criterion_7, criterion_8, lambda: criterion_9(tmp)]
        ok = all([c() for c in checks])
    sys.exit(0 if ok else 1)
