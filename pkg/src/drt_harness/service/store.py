"""Append-only JSON Lines event log with snapshots and fault injection.

The log is the source of truth: every accepted command is appended before
it mutates in-memory state, so replaying the file reconstructs the exact
pre-crash state. Fault injection (used by crash-recovery tests) kills the
writer after a set number of appends, optionally mid-line to simulate a
torn write.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class CrashInjected(Exception):
    """Simulated process death raised by a fault-injected log."""


class EventLog:
    def __init__(self, path: str | Path, *, fault_after: int | None = None,
                 tear_on_fault: bool = False, fsync: bool = False):
        self.path = Path(path)
        self.fault_after = fault_after
        self.tear_on_fault = tear_on_fault
        self.fsync = fsync
        self._appends = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        if self.fault_after is not None and self._appends >= self.fault_after:
            if self.tear_on_fault:
                self._fh.write(line[:max(1, len(line) // 2)])
                self._fh.flush()
            self.close()
            raise CrashInjected(f"injected crash after {self._appends} appends")
        self._fh.write(line + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())
        self._appends += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    @staticmethod
    def read(path: str | Path) -> list[dict]:
        """Read all records; a torn final line (crash artifact) is dropped."""
        path = Path(path)
        if not path.exists():
            return []
        records: list[dict] = []
        lines = path.read_text(encoding="utf-8").split("\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                if i >= len(lines) - 2:  # torn tail from a mid-write crash
                    break
                raise
        return records


class SnapshotStore:
    """Periodic full-state snapshot; recovery replays only the log tail."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def write(self, seq: int, state: dict) -> None:
        doc = {"seq": seq, "state": state}
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, ensure_ascii=False, sort_keys=True),
                       encoding="utf-8")
        tmp.replace(self.path)

    def load(self) -> tuple[int, dict] | None:
        if not self.path.exists():
            return None
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        return int(doc["seq"]), doc["state"]
