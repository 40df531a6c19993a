"""Study hosting service: core logic, persistence, HTTP API."""

from .core import HarnessService
from .store import CrashInjected, EventLog, SnapshotStore

__all__ = ["HarnessService", "EventLog", "SnapshotStore", "CrashInjected",
           "create_app"]


def create_app(service, **kwargs):
    from .api import create_app as _create

    return _create(service, **kwargs)
