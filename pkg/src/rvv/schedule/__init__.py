"""History notation, the step-wise executor and anomaly detectors."""

from .anomalies import (
    AnomalyReport,
    ConflictEdge,
    LostUpdate,
    analyze,
    check_serializability,
    conflict_edges,
    detect_lost_update,
)
from .executor import Executor, ProgramError, ProgramFailure, ScheduleError, StuckSchedule
from .history import (
    History,
    HistoryError,
    IllFormedHistory,
    OpKind,
    Operation,
    ParseError,
    Position,
    TxnDecl,
    check_well_formed,
    format_history,
    parse_history,
)
from .program import Abort, Begin, Commit, CondWrite, Note, Program, Read, Request, Tick, Write
from .runner import (
    CLOCK_PROGRAM,
    EXHAUSTIVE_BOUND,
    BoundExceeded,
    ItemMissing,
    compile_history,
    enumerate_interleavings,
    execute,
    resolve_item,
    run_programs,
)
from .trace import Access, ExecutionTrace, TraceStep

__all__ = [
    "Abort", "Access", "AnomalyReport", "Begin", "BoundExceeded", "CLOCK_PROGRAM", "Commit",
    "CondWrite", "ConflictEdge", "EXHAUSTIVE_BOUND", "ExecutionTrace", "Executor", "History",
    "HistoryError", "IllFormedHistory", "ItemMissing", "LostUpdate", "Note", "OpKind", "Operation",
    "ParseError", "Position", "Program", "ProgramError", "ProgramFailure", "Read", "Request",
    "ScheduleError", "StuckSchedule", "Tick", "TraceStep", "TxnDecl", "Write", "analyze",
    "check_serializability", "check_well_formed", "compile_history", "conflict_edges",
    "detect_lost_update", "enumerate_interleavings", "execute", "format_history",
    "parse_history", "resolve_item", "run_programs",
]
