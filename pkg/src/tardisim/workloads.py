"""Workload corpus: a tiny program DSL, builtin litmus tests and case
studies, and a seeded synthetic generator.

Program text is split into per-core sections:

    [core 0]
    St A 1
    Ld B -> r1
    Fence

    [core 1]
    Sleep 5
    SpinUntil A == 1

Symbolic addresses map to consecutive cache lines in order of first
use.  `St A` with no literal stores 1.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum, auto


class OpKind(Enum):
    LOAD = auto()
    STORE = auto()
    FENCE = auto()
    ACQUIRE = auto()
    RELEASE = auto()
    SLEEP = auto()
    SPIN = auto()


MEM_KINDS = (OpKind.LOAD, OpKind.STORE, OpKind.SPIN)
SYNC_KINDS = (OpKind.FENCE, OpKind.ACQUIRE, OpKind.RELEASE)


@dataclass(frozen=True)
class MemOp:
    kind: OpKind
    addr: int | None = None
    reg: str | None = None
    value: int = 1        # store literal / spin target
    n: int = 0            # sleep duration

    def brief(self) -> str:
        k = self.kind
        if k is OpKind.STORE:
            return f"St {self.addr} {self.value}"
        if k is OpKind.LOAD:
            return f"Ld {self.addr}" + (f" -> {self.reg}" if self.reg else "")
        if k is OpKind.SPIN:
            return f"SpinUntil {self.addr} == {self.value}"
        if k is OpKind.SLEEP:
            return f"Sleep {self.n}"
        return k.name.title()


@dataclass
class WarmLine:
    """Pre-run cache contents: the LLC holds the line Shared with the
    given timestamps; in_l1 lists cores that also start with a Shared
    copy."""
    addr: int
    wts: int = 0
    rts: int = 0
    in_l1: tuple = ()


@dataclass
class Program:
    name: str
    cores: list[list[MemOp]]
    warm: list[WarmLine] = field(default_factory=list)
    schedule: str | None = None        # None/seeded | sequential | lockstep
    addr_names: dict[int, str] = field(default_factory=dict)

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    def dynamic_ops(self) -> int:
        return sum(len(c) for c in self.cores)

    def registers(self) -> list[tuple[int, str]]:
        """(core, reg) pairs in first-use order; defines outcome layout."""
        regs = []
        for cid, ops in enumerate(self.cores):
            for op in ops:
                if op.kind is OpKind.LOAD and op.reg and (cid, op.reg) not in regs:
                    regs.append((cid, op.reg))
        return regs


class ParseError(ValueError):
    pass


_SECTION = re.compile(r"^\[\s*core\s+(\d+)\s*\]$", re.I)
_SPIN = re.compile(r"^SpinUntil\s+(\S+)\s*==\s*(-?\d+)$", re.I)


def parse_program(text: str, name: str = "program",
                  line_bytes: int = 64) -> Program:
    cores: dict[int, list[MemOp]] = {}
    addr_of: dict[str, int] = {}
    names: dict[int, str] = {}

    def resolve(tok: str) -> int:
        try:
            raw = int(tok, 0)
        except ValueError:
            raw = None
        if raw is not None:
            if raw % line_bytes:
                raise ParseError(f"address {tok} is not line aligned")
            return raw
        if tok not in addr_of:
            addr_of[tok] = len(addr_of) * line_bytes
            names[addr_of[tok]] = tok
        return addr_of[tok]

    current: list[MemOp] | None = None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            cid = int(m.group(1))
            current = cores.setdefault(cid, [])
            continue
        if current is None:
            raise ParseError(f"line {ln}: op before any [core N] section")
        toks = line.split()
        head = toks[0].lower()
        try:
            if head == "st":
                lit = int(toks[2], 0) if len(toks) > 2 else 1
                current.append(MemOp(OpKind.STORE, resolve(toks[1]), value=lit))
            elif head == "ld":
                reg = None
                if len(toks) >= 4 and toks[2] == "->":
                    reg = toks[3]
                elif len(toks) != 2:
                    raise ParseError(f"line {ln}: expected 'Ld A [-> r]'")
                current.append(MemOp(OpKind.LOAD, resolve(toks[1]), reg=reg))
            elif head == "fence":
                current.append(MemOp(OpKind.FENCE))
            elif head in ("acq", "acquire"):
                current.append(MemOp(OpKind.ACQUIRE))
            elif head in ("rel", "release"):
                current.append(MemOp(OpKind.RELEASE))
            elif head == "sleep":
                current.append(MemOp(OpKind.SLEEP, n=int(toks[1])))
            elif head == "spinuntil":
                m = _SPIN.match(line)
                if not m:
                    raise ParseError(f"line {ln}: expected 'SpinUntil A == v'")
                current.append(MemOp(OpKind.SPIN, resolve(m.group(1)),
                                     value=int(m.group(2))))
            else:
                raise ParseError(f"line {ln}: unknown op {toks[0]!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {ln}: malformed op {line!r}") from None

    if not cores:
        raise ParseError("program has no core sections")
    n = max(cores) + 1
    return Program(name, [cores.get(i, []) for i in range(n)], addr_names=names)


def load_program(path: str, line_bytes: int = 64) -> Program:
    with open(path) as fh:
        text = fh.read()
    name = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return parse_program(text, name=name, line_bytes=line_bytes)


# ---------------------------------------------------------------------------
# builtin programs


def _two_addr(line_bytes: int):
    return 0, line_bytes


def builtin(name: str, line_bytes: int = 64, **params) -> Program:
    """Builtin programs by name; see BUILTIN_NAMES."""
    a, b = _two_addr(line_bytes)
    c = 2 * line_bytes
    d = 3 * line_bytes
    names = {a: "A", b: "B", c: "C", d: "D"}

    def prog(text: str) -> Program:
        p = parse_program(text, name=name, line_bytes=line_bytes)
        return p

    if name == "fig1":
        # one store+load per core, run strictly one core after the other
        p = prog("""
            [core 0]
            St A 1
            Ld B -> r1
            [core 1]
            St B 1
            Ld A -> r2
        """)
        p.warm = [WarmLine(a, 0, 0), WarmLine(b, 0, 0)]
        p.schedule = "sequential"
        return p

    if name in ("fig2", "listing2"):
        p = prog("""
            [core 0]
            St B 1
            Ld B -> r1
            Ld A -> r2
            [core 1]
            St A 2
            Fence
            Ld B -> r3
        """)
        if name == "fig2":
            sym = {v: k for k, v in p.addr_names.items()}
            p.warm = [WarmLine(sym["A"], 0, 5, in_l1=(0, 1)),
                      WarmLine(sym["B"], 0, 10, in_l1=(0, 1))]
            p.schedule = "lockstep"
        return p

    if name in ("dekker", "sb"):
        return prog("""
            [core 0]
            St A 1
            Ld B -> r1
            [core 1]
            St B 1
            Ld A -> r2
        """)

    if name == "sb_fence":
        return prog("""
            [core 0]
            St A 1
            Fence
            Ld B -> r1
            [core 1]
            St B 1
            Fence
            Ld A -> r2
        """)

    if name == "mp":
        return prog("""
            [core 0]
            St D 1
            St F 1
            [core 1]
            Ld F -> r1
            Ld D -> r2
        """)

    if name == "mp_fence":
        return prog("""
            [core 0]
            St D 1
            Fence
            St F 1
            [core 1]
            Ld F -> r1
            Fence
            Ld D -> r2
        """)

    if name == "lb":
        return prog("""
            [core 0]
            Ld A -> r1
            St B 1
            [core 1]
            Ld B -> r2
            St A 1
        """)

    if name == "lb_fence":
        return prog("""
            [core 0]
            Ld A -> r1
            Fence
            St B 1
            [core 1]
            Ld B -> r2
            Fence
            St A 1
        """)

    if name == "iriw":
        return prog("""
            [core 0]
            St A 1
            [core 1]
            St B 1
            [core 2]
            Ld A -> r1
            Ld B -> r2
            [core 3]
            Ld B -> r3
            Ld A -> r4
        """)

    if name == "iriw_fence":
        return prog("""
            [core 0]
            St A 1
            [core 1]
            St B 1
            [core 2]
            Ld A -> r1
            Fence
            Ld B -> r2
            [core 3]
            Ld B -> r3
            Fence
            Ld A -> r4
        """)

    if name == "wrc":
        return prog("""
            [core 0]
            St A 1
            [core 1]
            Ld A -> r1
            St B 1
            [core 2]
            Ld B -> r2
            Ld A -> r3
        """)

    if name == "wrc_fence":
        return prog("""
            [core 0]
            St A 1
            [core 1]
            Ld A -> r1
            Fence
            St B 1
            [core 2]
            Ld B -> r2
            Fence
            Ld A -> r3
        """)

    if name == "corr":
        return prog("""
            [core 0]
            St A 1
            [core 1]
            Ld A -> r1
            Ld A -> r2
        """)

    if name == "rc_mp":
        return prog("""
            [core 0]
            St D 1
            Rel
            St F 1
            [core 1]
            Ld F -> r1
            Acq
            Ld D -> r2
        """)

    if name == "single":
        return prog("""
            [core 0]
            St A 7
            Ld A -> r1
        """)

    if name == "spin":
        delay = int(params.get("delay", 2000))
        p = Program(name, [
            [MemOp(OpKind.SPIN, d, value=1),
             MemOp(OpKind.LOAD, d, reg="r1")],
            [MemOp(OpKind.SLEEP, n=delay),
             MemOp(OpKind.STORE, d, value=1),
             MemOp(OpKind.SLEEP, n=2)],
        ], addr_names={d: "D"})
        # the spinner starts with a Shared copy of the flag: the classic
        # stale-lease scenario (an Exclusive copy would just get recalled
        # by the producer's store and never go stale)
        p.warm = [WarmLine(d, 0, 0, in_l1=(0,))]
        return p

    if name == "lease_case":
        iters = int(params.get("iterations", 10))
        body = [MemOp(OpKind.LOAD, a, reg=None),    # print(A)
                MemOp(OpKind.LOAD, b, reg=None),    # B++
                MemOp(OpKind.STORE, b, value=1),
                MemOp(OpKind.FENCE)]
        p = Program(name, [list(body) * iters, list(body) * iters],
                    addr_names={a: "A", b: "B"})
        return p

    raise ParseError(f"unknown builtin program {name!r}")


LITMUS_NAMES = ["dekker", "sb_fence", "mp", "mp_fence", "lb", "lb_fence",
                "iriw", "iriw_fence", "wrc", "wrc_fence", "corr",
                "listing2", "rc_mp", "single"]
BUILTIN_NAMES = LITMUS_NAMES + ["fig1", "fig2", "sb", "spin", "lease_case"]


# ---------------------------------------------------------------------------
# synthetic workloads


@dataclass
class SynthParams:
    cores: int = 4
    ops_per_core: int = 60
    hot_lines: int = 4           # shared hot set
    shared_lines: int = 16       # colder shared pool
    private_lines: int = 8       # per-core read-mostly block
    write_frac: float = 0.25
    hot_frac: float = 0.5
    private_frac: float = 0.25
    fence_frac: float = 0.05
    seed: int = 0


def synth(params: SynthParams, line_bytes: int = 64) -> Program:
    """Deterministic random workload; same params+seed => same program."""
    rng = random.Random(params.seed)
    hot = [i * line_bytes for i in range(params.hot_lines)]
    shared = [(params.hot_lines + i) * line_bytes
              for i in range(params.shared_lines)]
    base = params.hot_lines + params.shared_lines
    cores = []
    for cid in range(params.cores):
        priv = [(base + cid * params.private_lines + i) * line_bytes
                for i in range(params.private_lines)]
        ops: list[MemOp] = []
        lit = 0
        while len(ops) < params.ops_per_core:
            r = rng.random()
            if r < params.fence_frac:
                ops.append(MemOp(OpKind.FENCE))
                continue
            pick = rng.random()
            if pick < params.hot_frac:
                addr = rng.choice(hot)
                private = False
            elif pick < params.hot_frac + params.private_frac and priv:
                addr = rng.choice(priv)
                private = True
            else:
                addr = rng.choice(shared)
                private = False
            # private blocks stay read-only so exclusive grants matter
            if not private and rng.random() < params.write_frac:
                lit += 1
                ops.append(MemOp(OpKind.STORE, addr, value=lit))
            else:
                ops.append(MemOp(OpKind.LOAD, addr, reg=None))
        cores.append(ops)
    return Program(f"synth-{params.seed}", cores)
