"""Scenarios shipped with the tool, in the scenario file format."""

from __future__ import annotations

_ACCOUNT = "row = acct|101|balance=1000|counter:0\n"

_RACE = (
    _ACCOUNT
    + "history = txn A delta=-100\n"
    + "history = txn B delta=-200\n"
    + "history = rA(101) rB(101) wB(101) cB wA(101) cA\n"
)

BUILTINS: dict[str, str] = {
    "withdrawal-lost-update": (
        "name = withdrawal-lost-update\nengine = lscc\nstamp = counter\niso = rc\n"
        + _RACE
        + "expect = final:acct:101.balance == 900\n"
        "expect = lost_updates == 1\n"
        "expect = lost_victims == B\n"
        "expect = serializable == false\n"
        "expect_sweep = lost_update_runs >= 1\n"
    ),
    "withdrawal-repeatable-read": (
        "name = withdrawal-repeatable-read\nengine = lscc\nstamp = counter\niso = rr\n"
        + _RACE
        + "expect = victims == B\n"
        "expect = status:A == COMMITTED\n"
        "expect = status:B == ABORTED\n"
        "expect = final:acct:101.balance == 900\n"
        "expect = lost_updates == 0\n"
        "expect_sweep = lost_update_runs == 0\n"
    ),
    "withdrawal-sensitive": (
        "name = withdrawal-sensitive\nengine = lscc\nstamp = counter\n"
        + _ACCOUNT
        + "program = A sensitive -100\n"
        "program = B sensitive -200\n"
        "schedule = A B B A\n"
        "expect = final:acct:101.balance == 700\n"
        "expect = lost_updates == 0\n"
        "expect_sweep = finals:acct:101.balance == 700\n"
        "expect_sweep = lost_update_runs == 0\n"
    ),
    "withdrawal-conditional": (
        "name = withdrawal-conditional\nengine = lscc\nstamp = counter\n"
        + _ACCOUNT
        + "program = A conditional -100\n"
        "program = B sensitive -200\n"
        "schedule = A B B A A\n"
        "expect = final:acct:101.balance == 800\n"
        "expect = status:A == CONFLICT_DETECTED\n"
        "expect = lost_updates == 0\n"
        "expect_sweep = lost_update_runs == 0\n"
    ),
    "withdrawal-reselect": (
        "name = withdrawal-reselect\nengine = lscc\nstamp = counter\n"
        + _ACCOUNT
        + "program = A reselect -100 iso=rr\n"
        "program = B sensitive -200\n"
        "schedule = A B B A A\n"
        "expect = final:acct:101.balance == 700\n"
        "expect = status:A == RETRIED_APPLIED\n"
        "expect = lost_updates == 0\n"
        "expect_sweep = lost_update_runs == 0\n"
        "expect_sweep = finals:acct:101.balance == 700\n"
    ),
    "withdrawal-blind-split": (
        "name = withdrawal-blind-split\nengine = lscc\nstamp = counter\n"
        + _ACCOUNT
        + "program = A blind -100\n"
        "program = B sensitive -200\n"
        "schedule = A B B A A\n"
        "expect = final:acct:101.balance == 900\n"
        "expect = status:A == APPLIED\n"
        "expect = lost_updates == 1\n"
        "expect = lost_victims == B\n"
        "expect_sweep = lost_update_runs >= 1\n"
    ),
    "occ-history-1": (
        "name = occ-history-1\nengine = lscc\nstamp = counter\n"
        "row = t|x|v=1000|counter:0\n"
        "history = rA(x) rB(x) valA wA(x) valB aB\n"
        "expect = status:A == COMMITTED\n"
        "expect = status:B == ABORTED\n"
        "expect_sweep = lost_update_runs == 0\n"
    ),
    "occ-history-2": (
        "name = occ-history-2\nengine = lscc\nstamp = counter\n"
        "row = t|x|v=1000|counter:0\n"
        "history = rA(x) rB(x) aA valB wB(x)\n"
        "expect = status:A == ABORTED\n"
        "expect = status:B == COMMITTED\n"
    ),
    "timestamp-collision": (
        "name = timestamp-collision\nengine = lscc\nstamp = coarse\nresolution = 1\n"
        "row = acct|101|balance=1000|coarse:0\n"
        "program = A conditional -100\n"
        "program = B sensitive -200\n"
        "schedule = A B B A A\n"
        "expect = status:A == APPLIED\n"
        "expect = final:acct:101.balance == 900\n"
        "expect = lost_updates == 1\n"
        "expect_sweep = lost_update_runs >= 1\n"
    ),
    "ulock-deadlock": (
        "name = ulock-deadlock\nengine = lscc\nstamp = rowversion\niso = rr\n"
        + _ACCOUNT.replace("counter:0", "rowversion:0")
        + "history = txn A delta=-100\n"
        "history = txn B delta=-200\n"
        "history = rA(101) wB(101) cB wA(101) cA\n"
        "expect = victims == B\n"
        "expect = status:A == COMMITTED\n"
        "expect = final:acct:101.balance == 900\n"
    ),
    "ulock-control": (
        "name = ulock-control\nengine = lscc\nstamp = counter\niso = rr\n"
        + _ACCOUNT
        + "history = txn A delta=-100\n"
        "history = txn B delta=-200\n"
        "history = rA(101) wB(101) cB wA(101) cA\n"
        "expect = victims == -\n"
        "expect = status:A == COMMITTED\n"
        "expect = status:B == COMMITTED\n"
        "expect = final:acct:101.balance == 700\n"
    ),
}
