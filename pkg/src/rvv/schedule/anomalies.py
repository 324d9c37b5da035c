"""Lost-update and conflict-serializability analysis of execution traces.

Both detectors work on the committed version ordinals recorded in the trace,
not on client-visible stamps, so they stay correct when a stamping strategy
hands out colliding stamps.

Transactions are grouped by the program that ran them: a user transaction
split into a read transaction and a later write transaction is one node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from ..engine.types import RowKey
from .trace import Access, ExecutionTrace


@dataclass(frozen=True, order=True)
class LostUpdate:
    item: RowKey
    victim: str
    overwriter: str
    victim_write_step: int


@dataclass(frozen=True, order=True)
class ConflictEdge:
    source: str
    target: str
    item: RowKey
    kind: str  # "rw", "wr" or "ww"


@dataclass
class AnomalyReport:
    lost_updates: list[LostUpdate] = field(default_factory=list)
    serializable: bool = True
    edges: list[ConflictEdge] = field(default_factory=list)


def committed_accesses(trace: ExecutionTrace) -> list[Access]:
    done = trace.committed_txns()
    return [a for a in trace.accesses if a.txn in done]


def _installs(accesses: list[Access]) -> dict[tuple[RowKey, int], Access]:
    return {(a.key, a.version): a for a in accesses if a.kind == "w" and a.version is not None}


def detect_lost_update(trace: ExecutionTrace) -> AnomalyReport:
    """Flag committed writes whose value ignored a newer committed version.

    A write installing version ``n`` of an item, computed from version
    ``b < n - 1``, silently discards every version in between; each of their
    writers (from another program) is reported as a victim.
    """
    accesses = committed_accesses(trace)
    installs = _installs(accesses)
    found = set()
    for w in accesses:
        if w.kind != "w" or w.version is None or w.basis is None:
            continue
        for v in range(w.basis + 1, w.version):
            lost = installs.get((w.key, v))
            if lost is not None and lost.program != w.program:
                found.add(LostUpdate(w.key, lost.program, w.program, lost.step))
    return AnomalyReport(lost_updates=sorted(found))


def conflict_edges(trace: ExecutionTrace) -> list[ConflictEdge]:
    accesses = committed_accesses(trace)
    installs = _installs(accesses)
    writes = [a for a in accesses if a.kind == "w" and a.version is not None]
    reads = [a for a in accesses if a.kind == "r" and not a.own]
    edges = set()
    for w1 in writes:
        for w2 in writes:
            if w1.key == w2.key and w1.program != w2.program and w1.version < w2.version:
                edges.add(ConflictEdge(w1.program, w2.program, w1.key, "ww"))
    for r in reads:
        src = installs.get((r.key, r.version))
        if src is not None and src.program != r.program:
            edges.add(ConflictEdge(src.program, r.program, r.key, "wr"))
        for w in writes:
            if w.key == r.key and w.program != r.program and w.version > r.version:
                edges.add(ConflictEdge(r.program, w.program, r.key, "rw"))
    return sorted(edges)


def check_serializability(trace: ExecutionTrace) -> AnomalyReport:
    edges = conflict_edges(trace)
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted({a.program for a in committed_accesses(trace)}))
    graph.add_edges_from((e.source, e.target) for e in edges)
    return AnomalyReport(serializable=nx.is_directed_acyclic_graph(graph), edges=edges)


def analyze(trace: ExecutionTrace) -> AnomalyReport:
    lost = detect_lost_update(trace)
    ser = check_serializability(trace)
    return AnomalyReport(lost.lost_updates, ser.serializable, ser.edges)
