"""Injectable clocks.

Every operation takes its timestamp as a parameter; nothing below the
service layer reads wall time.  The virtual clock is what makes the
multi-year forgetting lifecycle testable in milliseconds.
"""

from __future__ import annotations

from datetime import datetime, timezone


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def iso(dt: datetime) -> str:
    """RFC 3339 string, always UTC."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat()


def parse_iso(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


class Clock:
    """Wall clock."""

    def now(self) -> datetime:
        return utcnow()


class VirtualClock(Clock):
    """Clock pinned to an explicit instant, advanced by the caller."""

    def __init__(self, start: datetime | None = None):
        self._now = start or utcnow()

    def now(self) -> datetime:
        return self._now

    def set(self, dt: datetime) -> None:
        self._now = dt

    def advance_days(self, days: float) -> None:
        from datetime import timedelta

        self._now = self._now + timedelta(days=days)
