"""Cache line records, set-associative containers and main memory.

Data is modeled as opaque value tokens (writer core + per-core store
sequence + the program-level literal).  A token is enough to check the
value axiom of every memory model without simulating real bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

# The four lease values a 2-bit lease field can encode.
LEASE_VALUES = (8, 16, 32, 64)
MIN_LEASE = LEASE_VALUES[0]
MAX_LEASE = LEASE_VALUES[-1]


def encode_lease(lease: int) -> int:
    """Lease value -> 2-bit code."""
    return LEASE_VALUES.index(lease)


def decode_lease(code: int) -> int:
    return LEASE_VALUES[code]


@dataclass(frozen=True)
class ValueToken:
    """Identity of one dynamic store (or of pre-run memory contents)."""

    writer: int          # core id, -1 for initial memory contents
    seq: int             # per-core store sequence; the address for initials
    literal: int = 0     # program-level value, 0 for initials

    @property
    def is_initial(self) -> bool:
        return self.writer < 0

    def as_tuple(self) -> tuple:
        return (self.writer, self.seq, self.literal)


def initial_token(addr: int) -> ValueToken:
    return ValueToken(-1, addr, 0)


class LineState(str, Enum):
    M = "M"
    E = "E"
    S = "S"
    I = "I"


@dataclass
class CacheLine:
    """One private-cache line: MESI state plus the timestamp pair."""

    addr: int
    state: LineState = LineState.I
    wts: int = 0
    rts: int = 0
    value: ValueToken | None = None
    dirty: bool = False
    lease: int = MIN_LEASE   # lease this copy was granted with (renew echo)
    lru: int = 0


@dataclass
class LlcLine:
    """One shared-cache line.

    owner is None while the LLC holds the master copy (Shared state);
    otherwise it names the core whose private cache owns the line in
    E or M.  cur_lease is the lease predictor's per-line state.  The
    e_bit marks lines that are probably private (exclusive grant hint).
    """

    addr: int
    wts: int = 0
    rts: int = 0
    value: ValueToken | None = None
    owner: int | None = None
    e_bit: bool = False
    cur_lease: int = MIN_LEASE
    # directory bookkeeping; unused in tardis mode
    sharers: set = field(default_factory=set)
    lru: int = 0


class SetAssocCache:
    """Set-associative container with LRU replacement.

    Stores whatever line objects the caller hands it; the only contract
    is an .addr and .lru attribute.  Victim selection is the caller's
    job (protocols differ on which lines are evictable), so the cache
    just reports the resident lines of a set.
    """

    def __init__(self, size_kb: int, ways: int, line_bytes: int):
        self.ways = ways
        self.line_bytes = line_bytes
        self.n_sets = max(1, (size_kb * 1024) // (ways * line_bytes))
        self.sets: list[dict] = [dict() for _ in range(self.n_sets)]
        self._tick = 0

    def set_index(self, addr: int) -> int:
        return (addr // self.line_bytes) % self.n_sets

    def lookup(self, addr: int, touch: bool = True):
        line = self.sets[self.set_index(addr)].get(addr)
        if line is not None and touch:
            self._tick += 1
            line.lru = self._tick
        return line

    def set_lines(self, addr: int) -> list:
        return list(self.sets[self.set_index(addr)].values())

    def has_room(self, addr: int) -> bool:
        return len(self.sets[self.set_index(addr)]) < self.ways

    def lru_victim(self, addr: int, avoid=None):
        """Least recently used line of addr's set, skipping lines for
        which avoid(line) is true.  None if the set has a free way or
        every candidate is excluded."""
        s = self.sets[self.set_index(addr)]
        if len(s) < self.ways:
            return None
        cands = [l for l in s.values() if avoid is None or not avoid(l)]
        if not cands:
            return None
        return min(cands, key=lambda l: l.lru)

    def insert(self, line) -> None:
        s = self.sets[self.set_index(line.addr)]
        assert line.addr not in s and len(s) < self.ways, "insert needs a free way"
        self._tick += 1
        line.lru = self._tick
        s[line.addr] = line

    def remove(self, addr: int):
        return self.sets[self.set_index(addr)].pop(addr, None)

    def lines(self):
        for s in self.sets:
            yield from s.values()

    def __len__(self) -> int:
        return sum(len(s) for s in self.sets)


@dataclass
class MemLine:
    value: ValueToken
    wts: int = 0
    rts: int = 0
    lease: int = MIN_LEASE


class MainMemory:
    """Backing store.  Timestamps and the predictor lease survive LLC
    eviction/refill round trips through here."""

    def __init__(self):
        self.lines: dict[int, MemLine] = {}

    def read(self, addr: int) -> MemLine:
        line = self.lines.get(addr)
        if line is None:
            line = MemLine(value=initial_token(addr))
            self.lines[addr] = line
        return line

    def write(self, addr: int, value: ValueToken, wts: int, rts: int,
              lease: int = MIN_LEASE) -> None:
        self.lines[addr] = MemLine(value=value, wts=wts, rts=rts, lease=lease)
