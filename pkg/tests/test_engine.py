import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ACCT, account, config
from rvv.engine import (
    CCMode,
    DeadlockVictim,
    Engine,
    IndeterminateStamp,
    InvalidIsolationForMode,
    InvalidTransactionState,
    Isolation,
    LockMode,
    RowKey,
    RowNotFound,
    SerializationConflict,
    StampKind,
    TxnState,
    UnknownColumn,
    ValueOutOfRange,
    VersionStamp,
    WouldBlock,
)
from rvv.engine.core import normalize_stamp

RC, RR, SNAP, SER = (
    Isolation.READ_COMMITTED,
    Isolation.REPEATABLE_READ,
    Isolation.SNAPSHOT,
    Isolation.SERIALIZABLE,
)


class TestBegin:
    def test_rc_under_lscc(self, lscc):
        t = lscc.begin(RC)
        assert t.state is TxnState.ACTIVE
        assert t.read_set == {} and t.write_set == {}

    @pytest.mark.parametrize("iso", [SNAP])
    def test_snapshot_rejected_under_lscc(self, lscc, iso):
        with pytest.raises(InvalidIsolationForMode):
            lscc.begin(iso)

    @pytest.mark.parametrize("iso", [RR, SER])
    def test_locking_levels_rejected_under_mvcc(self, mvcc, iso):
        with pytest.raises(InvalidIsolationForMode):
            mvcc.begin(iso)

    def test_snapshot_captures_commit_seq(self, mvcc):
        w = mvcc.begin(RC)
        mvcc.write(w, ACCT, {"balance": 5})
        mvcc.commit(w)
        t = mvcc.begin(SNAP)
        assert t.snapshot_seq == mvcc.commit_seq == 1

    def test_start_seq_increases(self, lscc):
        a, b = lscc.begin(RC), lscc.begin(RR)
        assert b.start_seq > a.start_seq

    def test_mode_mismatch(self, lscc):
        with pytest.raises(InvalidIsolationForMode):
            lscc.begin(RC, cc_mode=CCMode.MVCC)


class TestReadWrite:
    def test_fresh_read(self, lscc):
        r = lscc.read(lscc.begin(RC), ACCT, "balance")
        assert (r.value, r.stamp) == (1000, VersionStamp(StampKind.COUNTER, 0))

    def test_missing_row_and_column(self, lscc):
        t = lscc.begin(RC)
        with pytest.raises(RowNotFound):
            lscc.read(t, RowKey("acct", "999"), "balance")
        with pytest.raises(UnknownColumn):
            lscc.read(t, ACCT, "nope")
        with pytest.raises(UnknownColumn):
            lscc.write(t, ACCT, {"nope": 1})

    def test_int64_bounds(self, lscc):
        t = lscc.begin(RC)
        with pytest.raises(ValueOutOfRange):
            lscc.write(t, ACCT, {"balance": 2**63})

    def test_own_write_visible_and_applied_at_commit(self, lscc):
        t = lscc.begin(RC)
        lscc.write(t, ACCT, {"balance": 900})
        assert lscc.read(t, ACCT, "balance").value == 900
        assert lscc.value(ACCT, "balance") == 1000
        lscc.commit(t)
        assert lscc.value(ACCT, "balance") == 900

    def test_relative_write(self, lscc):
        t = lscc.begin(RC)
        ticket = lscc.write(t, ACCT, {"balance": -100}, relative=True)
        assert ticket.values["balance"] == 900

    def test_sole_writer_gets_x(self, lscc):
        t = lscc.begin(RC)
        lscc.write(t, ACCT, {"balance": 1})
        assert lscc.lock_mode(t, ACCT) is LockMode.X

    def test_rc_releases_s_after_read(self, lscc):
        t = lscc.begin(RC)
        lscc.read(t, ACCT, "balance")
        assert lscc.lock_mode(t, ACCT) is None

    def test_rr_holds_s(self, lscc):
        t = lscc.begin(RR)
        lscc.read(t, ACCT, "balance")
        assert lscc.lock_mode(t, ACCT) is LockMode.S

    def test_reader_blocks_on_x(self, lscc):
        w, r = lscc.begin(RC), lscc.begin(RC)
        lscc.write(w, ACCT, {"balance": 1})
        with pytest.raises(WouldBlock) as exc:
            lscc.read(r, ACCT, "balance")
        assert exc.value.waiting_for == (w.id,)
        assert r.state is TxnState.BLOCKED
        lscc.commit(w)
        assert r.state is TxnState.ACTIVE
        assert lscc.read(r, ACCT, "balance").value == 1

    def test_race_rc_b_writes_after_a_read(self, lscc):
        a, b = lscc.begin(RC), lscc.begin(RC)
        lscc.read(a, ACCT, "balance")
        lscc.read(b, ACCT, "balance")
        lscc.write(b, ACCT, {"balance": 800})
        lscc.commit(b)
        assert lscc.value(ACCT, "balance") == 800

    def test_snapshot_read_ignores_later_commit(self, mvcc):
        s = mvcc.begin(SNAP)
        assert mvcc.read(s, ACCT, "balance").value == 1000
        w = mvcc.begin(RC)
        mvcc.write(w, ACCT, {"balance": 1})
        mvcc.commit(w)
        assert mvcc.read(s, ACCT, "balance").value == 1000
        rc = mvcc.begin(RC)
        assert mvcc.read(rc, ACCT, "balance").value == 1

    def test_mvcc_reader_never_blocks(self, mvcc):
        w = mvcc.begin(RC)
        mvcc.write(w, ACCT, {"balance": 1})
        assert mvcc.read(mvcc.begin(SNAP), ACCT, "balance").value == 1000


class TestConditionalWrite:
    def test_match(self, lscc):
        t = lscc.begin(RC)
        assert lscc.conditional_write(t, ACCT, {"balance": 900}, VersionStamp(StampKind.COUNTER, 0)) == 1
        lscc.commit(t)
        assert lscc.row(ACCT).stamp == VersionStamp(StampKind.COUNTER, 1)

    def test_mismatch_buffers_nothing_and_releases(self, lscc):
        b = lscc.begin(RC)
        lscc.write(b, ACCT, {"balance": 800})
        lscc.commit(b)
        a2 = lscc.begin(RC)
        assert lscc.conditional_write(a2, ACCT, {"balance": 900}, VersionStamp(StampKind.COUNTER, 0)) == 0
        assert a2.write_set == {}
        assert lscc.lock_mode(a2, ACCT) is None
        lscc.commit(a2)
        assert lscc.value(ACCT, "balance") == 800

    def test_coarse_collision_accepts(self):
        eng = Engine(config(kind=StampKind.COARSE), [account(kind=StampKind.COARSE)])
        seen = eng.read(eng.begin(RC), ACCT, "balance").stamp
        b = eng.begin(RC)
        eng.write(b, ACCT, {"balance": 800})
        eng.commit(b)
        assert eng.row(ACCT).stamp == seen
        a2 = eng.begin(RC)
        assert eng.conditional_write(a2, ACCT, {"balance": 900}, seen) == 1

    def test_indeterminate_never_matches(self):
        eng = Engine(config(CCMode.MVCC, StampKind.SCN), [account(kind=StampKind.SCN)])
        holder = eng.begin(RC)
        eng.write(holder, ACCT, {"balance": 1})
        seen = eng.read(eng.begin(RC), ACCT, "balance").stamp
        assert seen.is_indeterminate
        assert seen != seen
        eng.abort(holder)
        t = eng.begin(RC)
        assert eng.conditional_write(t, ACCT, {"balance": 5}, seen) == 0


class TestCommitAbort:
    def test_counter_stamp_advances(self, lscc):
        t = lscc.begin(RC)
        lscc.write(t, ACCT, {"balance": 800})
        receipt = lscc.commit(t)
        assert receipt.installed[ACCT] == (1, VersionStamp(StampKind.COUNTER, 1))

    def test_empty_commit_keeps_stamps(self, lscc):
        before = lscc.row(ACCT).stamp
        t = lscc.begin(RC)
        lscc.commit(t)
        assert t.state is TxnState.COMMITTED
        assert lscc.row(ACCT).stamp == before

    def test_scn_commit_seq_strictly_increases(self):
        eng = Engine(config(kind=StampKind.SCN), [account(kind=StampKind.SCN)])
        seqs = []
        for v in (1, 2):
            t = eng.begin(RC)
            eng.write(t, ACCT, {"balance": v})
            seqs.append(eng.commit(t).commit_seq)
            assert eng.row(ACCT).stamp.value == seqs[-1]
        assert seqs[0] < seqs[1]

    def test_abort_discards(self, lscc):
        t = lscc.begin(RC)
        lscc.write(t, ACCT, {"balance": 1})
        lscc.abort(t)
        assert lscc.row(ACCT) == account()
        with pytest.raises(InvalidTransactionState):
            lscc.commit(t)
        with pytest.raises(InvalidTransactionState):
            lscc.abort(t)

    def test_abort_blocked_txn_leaves_queue(self, lscc):
        w, r = lscc.begin(RC), lscc.begin(RC)
        lscc.write(w, ACCT, {"balance": 1})
        with pytest.raises(WouldBlock):
            lscc.read(r, ACCT, "balance")
        lscc.abort(r)
        assert lscc.waits_for() == {}
        lscc.check_invariants()

    def test_mvcc_first_writer_wins(self, mvcc):
        a, b = mvcc.begin(RC), mvcc.begin(RC)
        mvcc.write(a, ACCT, {"balance": 900})
        with pytest.raises(WouldBlock):
            mvcc.write(b, ACCT, {"balance": 800})
        mvcc.commit(a)
        assert b.state is TxnState.ABORTED
        with pytest.raises(SerializationConflict):
            mvcc.write(b, ACCT, {"balance": 800})

    def test_mvcc_holder_abort_lets_waiter_proceed(self, mvcc):
        a, b = mvcc.begin(RC), mvcc.begin(RC)
        mvcc.write(a, ACCT, {"balance": 900})
        with pytest.raises(WouldBlock):
            mvcc.write(b, ACCT, {"balance": 800})
        mvcc.abort(a)
        assert b.state is TxnState.ACTIVE
        mvcc.write(b, ACCT, {"balance": 800})
        mvcc.commit(b)
        assert mvcc.value(ACCT, "balance") == 800

    def test_snapshot_write_after_newer_commit(self, mvcc):
        s = mvcc.begin(SNAP)
        w = mvcc.begin(RC)
        mvcc.write(w, ACCT, {"balance": 1})
        mvcc.commit(w)
        with pytest.raises(SerializationConflict):
            mvcc.write(s, ACCT, {"balance": 2})


class TestDeadlock:
    def test_no_waits(self, lscc):
        assert lscc.detect_deadlock() is None

    def test_rr_upgrade_cycle(self, lscc):
        a, b = lscc.begin(RR), lscc.begin(RR)
        lscc.read(a, ACCT, "balance")
        lscc.read(b, ACCT, "balance")
        with pytest.raises(WouldBlock):
            lscc.write(b, ACCT, {"balance": 800})
        with pytest.raises(WouldBlock):
            lscc.write(a, ACCT, {"balance": 900})
        # hand-computed wait-for graph: each waits on the other's S lock
        assert lscc.waits_for() == {a.id: {b.id}, b.id: {a.id}}
        assert lscc.detect_deadlock() == b.id
        assert a.state is TxnState.ACTIVE
        lscc.assert_acyclic()
        with pytest.raises(DeadlockVictim):
            lscc.read(b, ACCT, "balance")

    def test_rowversion_u_lock_deadlock(self):
        eng = Engine(config(kind=StampKind.ROWVERSION), [account(kind=StampKind.ROWVERSION)])
        a, b = eng.begin(RR), eng.begin(RR)
        eng.read(a, ACCT, "balance")
        with pytest.raises(WouldBlock):
            eng.write(b, ACCT, {"balance": -200}, relative=True)
        assert eng.lock_mode(b, ACCT) is LockMode.U
        with pytest.raises(WouldBlock):
            eng.write(a, ACCT, {"balance": 900})
        assert eng.detect_deadlock() == b.id
        eng.check_invariants()

    def test_counter_control_no_deadlock(self, lscc):
        a, b = lscc.begin(RR), lscc.begin(RR)
        lscc.read(a, ACCT, "balance")
        with pytest.raises(WouldBlock):
            lscc.write(b, ACCT, {"balance": -200}, relative=True)
        lscc.write(a, ACCT, {"balance": 900})  # upgrade jumps the queue
        assert lscc.detect_deadlock() is None


class TestNormalizeStamp:
    def test_counter_and_scn(self):
        assert normalize_stamp(VersionStamp(StampKind.COUNTER, 7)) == 7
        assert normalize_stamp(VersionStamp(StampKind.SCN, 42)) == 42

    def test_indeterminate(self):
        with pytest.raises(IndeterminateStamp):
            normalize_stamp(VersionStamp.indeterminate(StampKind.SCN))


def test_coarse_resolution_admits_shared_stamp():
    eng = Engine(config(kind=StampKind.COARSE, resolution=4), [account(kind=StampKind.COARSE)])
    stamps = []
    for v, ticks in ((1, 1), (2, 2)):
        eng.tick(ticks)
        t = eng.begin(RC)
        eng.write(t, ACCT, {"balance": v})
        stamps.append(eng.commit(t).installed[ACCT][1])
    assert stamps[0] == stamps[1]


# -- properties over random single-key workloads -------------------------------

_ACTIONS = st.lists(
    st.tuples(st.integers(0, 2), st.sampled_from(["r", "w", "c", "a"]), st.integers(-5, 5)),
    max_size=25,
)


@settings(max_examples=150, deadline=None)
@given(
    _ACTIONS,
    st.sampled_from([(CCMode.LSCC, RC), (CCMode.LSCC, RR), (CCMode.MVCC, RC), (CCMode.MVCC, SNAP)]),
    st.sampled_from([StampKind.COUNTER, StampKind.SCN, StampKind.ROWVERSION, StampKind.COARSE]),
)
def test_random_workload_invariants(actions, mode_iso, kind):
    """Lock safety, monotone stamps, atomicity and snapshot stability under any call order."""
    mode, iso = mode_iso
    eng = Engine(config(mode, kind), [account(kind=kind)])
    txns = [eng.begin(iso) for _ in range(3)]
    aborted_values = set()
    snapshot_seen = {}
    for i, action, n in actions:
        t = txns[i]
        if t.finished or t.state is TxnState.BLOCKED:
            continue
        try:
            if action == "r":
                r = eng.read(t, ACCT, "balance")
                assert r.own or r.value not in aborted_values
                if iso is SNAP and not r.own:
                    assert snapshot_seen.setdefault(t.id, r.value) == r.value
            elif action == "w":
                eng.write(t, ACCT, {"balance": 10_000 + 10 * i + n})
            elif action == "c":
                eng.commit(t)
            else:
                pending = t.write_set.get(ACCT, {}).get("balance")
                eng.abort(t)
                if pending is not None:
                    aborted_values.add(pending)
        except WouldBlock:
            pass
        except (SerializationConflict, DeadlockVictim):
            pass
        while eng.detect_deadlock() is not None:
            pass
        eng.check_invariants()
        eng.assert_acyclic()
    history = eng.version_history(ACCT)
    if kind is not StampKind.COARSE:
        values = [s.value for _, _, s, _ in history]
        assert values == sorted(set(values)), "stamps must strictly increase"
    if kind is StampKind.COUNTER:
        assert [s.value for _, _, s, _ in history] == list(range(len(history)))
    assert all(v not in aborted_values for v in (eng.value(ACCT, "balance"),))


def _mvcc_writer(eng, name, iso, log):
    def steps():
        t = eng.begin(iso, txn_id=name)
        log.append((name, "begin"))
        yield
        eng.write(t, ACCT, {"balance": ord(name)})
        log.append((name, "write"))
        yield
        eng.commit(t)
        log.append((name, "end"))

    return steps


def _overlap(log, iso):
    """Did the two writers run concurrently in the sense the pair rule covers?"""
    live, pending = set(), set()
    for name, event in log:
        other_live = live - {name}
        if iso is SNAP and event == "write" and other_live:
            return True
        if event in ("write", "attempt") and pending - {name}:
            return True
        if event == "begin":
            live.add(name)
        elif event == "write":
            pending.add(name)
        elif event == "end":
            live.discard(name)
            pending.discard(name)
    return False


@pytest.mark.parametrize("iso", [RC, SNAP])
def test_mvcc_pair_rule_exhaustive(iso):
    """Of two MVCC writers of one key active at once, at most one commits."""
    checked = 0
    for order in sorted(set(itertools.permutations("AAABBB"))):
        eng = Engine(config(CCMode.MVCC), [account()])
        log = []
        gens = {n: _mvcc_writer(eng, n, iso, log)() for n in "AB"}
        for name in order:
            t = eng.transactions.get(name)
            if t is not None and t.state is TxnState.BLOCKED:
                continue
            try:
                next(gens[name], None)
            except WouldBlock:
                log.append((name, "attempt"))
            except SerializationConflict:
                log.append((name, "end"))
        for name in "AB":  # let a parked writer finish once the other is done
            t = eng.transactions.get(name)
            if t is not None and not t.finished:
                try:
                    for _ in gens[name]:
                        pass
                except (SerializationConflict, WouldBlock):
                    pass
        states = [t.state for t in eng.transactions.values()]
        if _overlap(log, iso):
            checked += 1
            assert states.count(TxnState.COMMITTED) <= 1, (order, log)
    assert checked > 0
