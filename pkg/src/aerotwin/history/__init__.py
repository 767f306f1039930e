"""Append-only change history with time-range queries and replay."""
from .service import HistoryService
from .store import HistoryError, HistoryEvent, HistoryStore, diff_snapshots

__all__ = [
    "HistoryError",
    "HistoryEvent",
    "HistoryService",
    "HistoryStore",
    "diff_snapshots",
]
