"""Logical timestamps and the physiological order.

Every ordering question in the simulator reduces to comparing
(logical timestamp, physical step) pairs lexicographically.  Ties on
both components are broken by an arbitrary but fixed per-op key
(core id, per-core commit sequence); the tie-break only ever decides
between non-conflicting operations.
"""

from __future__ import annotations

from dataclasses import dataclass

# Timestamps are plain ints.  At desk scale a 64-bit counter cannot
# roll over, so there is no wrap handling anywhere.
Timestamp = int


@dataclass(frozen=True)
class PhysioTime:
    """Commit point of one operation: logical ts plus simulator step."""

    ts: Timestamp
    pt: int
    core: int = 0
    seq: int = 0

    def key(self) -> tuple:
        return (self.ts, self.pt, self.core, self.seq)

    def __lt__(self, other: "PhysioTime") -> bool:
        return self.key() < other.key()

    def __le__(self, other: "PhysioTime") -> bool:
        return self.key() <= other.key()


def physio_less(a: PhysioTime, b: PhysioTime) -> bool:
    """Strict physiological order: ts first, physical step second."""
    return a.key() < b.key()
