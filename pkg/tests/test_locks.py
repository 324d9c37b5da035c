from hypothesis import given, settings
from hypothesis import strategies as st

from rvv.engine import LockMode, LockTable, RowKey
from rvv.engine.types import compatible

K = RowKey("t", "x")
S, U, X = LockMode.S, LockMode.U, LockMode.X


def test_compatibility_matrix():
    expected = {(S, S): True, (S, U): True, (U, S): True}
    for held in LockMode:
        for req in LockMode:
            assert compatible(held, req) == expected.get((held, req), False)


def test_fifo_queue_and_grant_on_release():
    lt = LockTable()
    assert lt.acquire("A", K, X)
    assert not lt.acquire("B", K, S)
    assert not lt.acquire("C", K, S)
    assert lt.waits_for() == {"B": {"A"}, "C": {"A"}}
    assert sorted(lt.release_all("A")) == ["B", "C"]
    assert lt.holders(K) == {"B": S, "C": S}


def test_new_request_waits_behind_queue():
    lt = LockTable()
    lt.acquire("A", K, S)
    assert not lt.acquire("B", K, X)
    # compatible with the holder, but B is queued first
    assert not lt.acquire("C", K, S)
    assert lt.waits_for()["C"] == {"B"}


def test_upgrade_jumps_queue():
    lt = LockTable()
    lt.acquire("A", K, S)
    lt.acquire("B", K, S)
    assert not lt.acquire("C", K, X)
    assert not lt.acquire("A", K, X)
    assert lt.queue(K)[0].txn == "A"
    lt.release_all("B")
    assert lt.mode_of("A", K) is X
    assert lt.waiting_on("C") == K


def test_single_u_holder():
    lt = LockTable()
    assert lt.acquire("A", K, U)
    assert lt.acquire("B", K, S)
    assert not lt.acquire("C", K, U)


def test_repeat_request_is_idempotent():
    lt = LockTable()
    lt.acquire("A", K, X)
    assert not lt.acquire("B", K, X)
    assert not lt.acquire("B", K, X)
    assert len(lt.queue(K)) == 1


@settings(max_examples=300, deadline=None)
@given(
    st.lists(
        st.tuples(st.sampled_from("ABCD"), st.sampled_from(["S", "U", "X", "release"]), st.sampled_from("xy")),
        max_size=40,
    )
)
def test_lock_safety_under_any_sequence(ops):
    """No two holders are ever incompatible and each waiter sits in one queue."""
    lt = LockTable()
    waiting = {}
    for txn, op, item in ops:
        key = RowKey("t", item)
        if op == "release":
            for woken in lt.release_all(txn):
                waiting.pop(woken, None)
            waiting.pop(txn, None)
        elif txn not in waiting:
            if not lt.acquire(txn, key, LockMode[op]):
                waiting[txn] = key
        lt.check_safety()
        for t, k in waiting.items():
            assert lt.waiting_on(t) == k
            assert sum(r.txn == t for kk in (RowKey("t", "x"), RowKey("t", "y")) for r in lt.queue(kk)) == 1
