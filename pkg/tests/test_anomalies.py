import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ACCT, account, config
from generators import random_plain_history
from oracles import serializable_by_permutation
from rvv.engine import CCMode, Isolation, Row, RowKey, StampKind, VersionStamp
from rvv.patterns import pattern_program
from rvv.schedule import (
    StuckSchedule,
    analyze,
    check_serializability,
    detect_lost_update,
    enumerate_interleavings,
    execute,
    run_programs,
)

RACE = "txn A delta=-100\ntxn B delta=-200\nrA(101) rB(101) wB(101) cB wA(101) cA"
XY = [Row(RowKey("t", i), {"v": 10}, VersionStamp(StampKind.COUNTER, 0)) for i in "xy"]


def run(text, rows=XY, iso=Isolation.READ_COMMITTED, cfg=None):
    try:
        return execute(text, cfg or config(), rows, iso)
    except StuckSchedule as exc:
        return exc.trace


def test_race_blind_write_flagged():
    tr = run(RACE, [account()])
    report = detect_lost_update(tr)
    assert [(lu.victim, lu.overwriter, lu.item) for lu in report.lost_updates] == [("B", "A", ACCT)]
    assert report.lost_updates[0].victim_write_step == 5


def test_race_not_serializable_with_two_way_edges():
    report = check_serializability(run(RACE, [account()]))
    assert not report.serializable
    pairs = {(e.source, e.target) for e in report.edges}
    assert {("A", "B"), ("B", "A")} <= pairs


def test_sensitive_version_clean():
    # no read before the write: both updates are relative to the current value
    tr = run("txn A delta=-100\ntxn B delta=-200\nwB(101) cB wA(101) cA", [account()])
    assert tr.final_value(ACCT, "balance") == 700
    assert analyze(tr).lost_updates == []


def test_single_txn():
    report = analyze(run("rA(x) wA(x) cA"))
    assert report.lost_updates == [] and report.serializable


def test_aborted_overwriter_not_reported():
    assert detect_lost_update(run("rA(x) rB(x) wB(x) cB wA(x) aA")).lost_updates == []


def test_uncommitted_ignored():
    assert detect_lost_update(run("rA(x) rB(x) wB(x) cB wA(x)")).lost_updates == []


def test_coarse_collision_still_detected():
    rows = [account(kind=StampKind.COARSE)]
    cfg = config(kind=StampKind.COARSE)
    progs = [
        pattern_program("A", "conditional", ACCT, "balance", -100),
        pattern_program("B", "sensitive", ACCT, "balance", -200),
    ]
    tr = run_programs(progs, cfg, rows, ["A", "B", "B", "A", "A"])
    assert tr.final_value(ACCT, "balance") == 900
    assert [lu.victim for lu in detect_lost_update(tr).lost_updates] == ["B"]


def test_mvcc_snapshot_write_skew_is_not_serializable():
    text = "txn A iso=snap\ntxn B iso=snap\nrA(x) rA(y) rB(x) rB(y) wA(x) wB(y) cA cB"
    tr = run(text, cfg=config(CCMode.MVCC))
    assert tr.txn_states == {"A": "COMMITTED", "B": "COMMITTED"}
    assert not check_serializability(tr).serializable


def test_mvcc_snapshot_reads_edge_direction():
    # B reads its snapshot version after A commits: B precedes A
    text = "txn B iso=snap\nrB(y) rA(x) wA(x) cA rB(x) cB"
    report = check_serializability(run(text, cfg=config(CCMode.MVCC)))
    assert report.serializable
    assert [(e.source, e.target, e.kind) for e in report.edges] == [("B", "A", "rw")]


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_verdict_matches_permutation_oracle(rng):
    tr = run(random_plain_history(rng))
    assert check_serializability(tr).serializable == serializable_by_permutation(tr)


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_lost_updates_reference_committed_only(rng):
    tr = run(random_plain_history(rng))
    committed_programs = {tr.txn_program[t] for t in tr.committed_txns()}
    for lu in detect_lost_update(tr).lost_updates:
        assert {lu.victim, lu.overwriter} <= committed_programs


@pytest.mark.parametrize("pair", [("blind", "sensitive"), ("conditional", "sensitive"), ("occ", "occ")])
def test_verdict_matches_oracle_on_pattern_sweeps(pair):
    progs = [
        pattern_program("A", pair[0], ACCT, "balance", -100),
        pattern_program("B", pair[1], ACCT, "balance", -200),
    ]
    for tr in enumerate_interleavings(progs, config(), [account()]):
        assert check_serializability(tr).serializable == serializable_by_permutation(tr)


def test_oracle_sees_both_verdicts():
    verdicts = {serializable_by_permutation(run(random_plain_history(random.Random(s)))) for s in range(60)}
    assert verdicts == {True, False}
