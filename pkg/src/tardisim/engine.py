"""Deterministic simulation engine.

A run advances in ticks.  Each tick first delivers every network
message that is due, then gives cores a turn according to the schedule
(seeded round robin with random sit-outs by default; `sequential` and
`lockstep` exist for reproducing hand-worked executions).  A core
commits at most one operation per tick, so per-core commit steps are
strictly increasing, which is what lets the physical step serve as the
second component of physiological time.

The same protocol components also run under an exhaustive enumerator
(`enumerate_outcomes`) that replaces the clocked network with
explicitly scheduled message deliveries and explores every
interleaving of core micro-steps and deliveries, deduplicating states.
"""

from __future__ import annotations

import copy
import heapq
import json
import logging
import random
from dataclasses import dataclass, field, replace

from .cachemem import MainMemory, ValueToken
from .config import SimConfig
from .consistency import CoreClock, MemoryModel
from .messages import LLC, MEM, Msg, MsgKind, traffic_class
from .workloads import MemOp, OpKind, Program

log = logging.getLogger("tardisim")


class SimulationError(RuntimeError):
    pass


class DeadlockError(SimulationError):
    pass


class StepLimitError(SimulationError):
    pass


# ---------------------------------------------------------------------------
# trace


_KIND_STR = {OpKind.LOAD: "Ld", OpKind.STORE: "St", OpKind.FENCE: "Fence",
             OpKind.ACQUIRE: "Acq", OpKind.RELEASE: "Rel", OpKind.SPIN: "Spin"}
_STR_KIND = {v: k for k, v in _KIND_STR.items()}


@dataclass
class TraceOp:
    """One committed operation."""

    core: int
    idx: int                 # program index (spins repeat theirs)
    kind: OpKind
    addr: int | None
    value: ValueToken | None
    ts: int
    step: int
    seq: int                 # per-core commit sequence, tie-break key
    fwd: bool = False        # load served from the store buffer

    @property
    def is_mem(self) -> bool:
        return self.kind in (OpKind.LOAD, OpKind.STORE, OpKind.SPIN)

    def physio_key(self) -> tuple:
        return (self.ts, self.step, self.core, self.seq)

    def to_json(self) -> str:
        d = {"core": self.core, "i": self.idx, "op": _KIND_STR[self.kind],
             "ts": self.ts, "pt": self.step, "seq": self.seq}
        if self.addr is not None:
            d["addr"] = self.addr
        if self.value is not None:
            d["val"] = list(self.value.as_tuple())
        if self.fwd:
            d["fwd"] = True
        return json.dumps(d, sort_keys=True)


def trace_from_json(lines) -> list[TraceOp]:
    out = []
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        d = json.loads(raw)
        val = d.get("val")
        out.append(TraceOp(
            core=d["core"], idx=d["i"], kind=_STR_KIND[d["op"]],
            addr=d.get("addr"), value=ValueToken(*val) if val else None,
            ts=d["ts"], step=d["pt"], seq=d["seq"], fwd=d.get("fwd", False)))
    return out


# ---------------------------------------------------------------------------
# traffic accounting


TRAFFIC_CLASSES = ("common", "renew", "invalidation", "dram")


class TrafficLedger:
    def __init__(self):
        self.flits = {c: 0 for c in TRAFFIC_CLASSES}
        self.flit_hops = {c: 0 for c in TRAFFIC_CLASSES}
        self.messages = {c: 0 for c in TRAFFIC_CLASSES}

    def add(self, cls: str, flits: int, hops: int) -> None:
        self.flits[cls] += flits
        self.flit_hops[cls] += flits * hops
        self.messages[cls] += 1

    @property
    def total_flits(self) -> int:
        return sum(self.flits.values())

    @property
    def total_flit_hops(self) -> int:
        return sum(self.flit_hops.values())


@dataclass
class Counters:
    loads: int = 0
    stores: int = 0
    fences: int = 0
    llc_accesses: int = 0
    renew_reqs: int = 0
    renew_ok: int = 0
    renew_fail: int = 0
    checks_sent: int = 0
    renew_events: list = field(default_factory=list)  # (core, addr, ok, op_idx)
    record_renewals: bool = False


@dataclass
class StoreEntry:
    idx: int
    addr: int
    token: ValueToken


# ---------------------------------------------------------------------------
# protocol-agnostic core frontend


class BaseCore:
    """Program sequencing, store buffer and commit bookkeeping.

    Protocol subclasses provide _load (commit a load locally or send a
    request and block), _drain_issue (retire the store buffer head) and
    handle (process an incoming message).
    """

    SPIN_PAUSE = 1

    def __init__(self, sim, cid: int, ops: list[MemOp]):
        self.sim = sim
        self.cid = cid
        self.ops = ops
        self.pc = 0
        self.regs: dict[str, int] = {}
        self.clock = CoreClock(sim.cfg.memory_model)
        self.buffer: list[StoreEntry] = []
        self.buffer_cap = sim.cfg.store_buffer_size
        self.drain_inflight = False
        self.waiting = None          # dict(op=, idx=, addr=) while blocked
        self.sleep_left = 0
        self.seq = 0                 # per-core commit counter
        self.store_seq = 0
        self.access_count = 0
        self.si_period = sim.cfg.self_increment_period
        self.committed_step = -1
        self.detector = None

    # -- status --------------------------------------------------------

    @property
    def done(self) -> bool:
        return (self.pc >= len(self.ops) and not self.buffer
                and self.waiting is None)

    def can_progress_locally(self) -> bool:
        if self.done:
            return True
        if self.sleep_left > 0:
            return True
        if self.waiting is not None or self.drain_inflight:
            return False
        return True

    # -- per-tick entry points -----------------------------------------

    def turn(self, step: int) -> None:
        if self.done or self.committed_step == step:
            return
        if self.sleep_left > 0:
            self.sleep_left -= 1
            return
        self.try_drain(step)
        if self.committed_step == step or self.waiting is not None:
            return
        if self.pc < len(self.ops):
            self.exec_op(step)

    def try_drain(self, step: int) -> None:
        if not self.buffer or self.drain_inflight or self.committed_step == step:
            return
        self._drain_issue(self.buffer[0], step)

    def exec_op(self, step: int) -> None:
        if self.buffer_cap == 0 and self.buffer:
            return  # unbuffered mode: a store in flight blocks everything
        op = self.ops[self.pc]
        k = op.kind
        if k is OpKind.STORE:
            if self.buffer_cap and len(self.buffer) >= self.buffer_cap:
                return
            self.store_seq += 1
            tok = ValueToken(self.cid, self.store_seq, op.value)
            self.buffer.append(StoreEntry(self.pc, op.addr, tok))
            self.pc += 1
            return
        if k in (OpKind.FENCE, OpKind.ACQUIRE, OpKind.RELEASE):
            model = self.clock.model
            drains = not (model is MemoryModel.RC and k is OpKind.ACQUIRE)
            if drains and self.buffer:
                return
            ts = self._sync_commit(k)
            self.seq += 1
            self.sim.counters.fences += 1
            self.sim.trace_append(TraceOp(self.cid, self.pc, k, None, None,
                                          ts, step, self.seq))
            self.committed_step = step
            self.pc += 1
            return
        if k is OpKind.SLEEP:
            self.sleep_left = op.n
            self.pc += 1
            return
        # LOAD / SPIN: newest store-buffer entry wins
        for entry in reversed(self.buffer):
            if entry.addr == op.addr:
                pre = self.clock.read_ts
                ts = self.clock.commit_load(0, dirty_by_self=True)
                self._finish_load(op, self.pc, entry.token, ts, step, pre,
                                  fwd=True)
                return
        self._load(op, step)

    def _sync_commit(self, kind: OpKind) -> int:
        clock = self.clock
        model = clock.model
        if model is MemoryModel.SC:
            return clock.pts
        if model is MemoryModel.RC:
            if kind is OpKind.ACQUIRE:
                return clock.acquire()
            if kind is OpKind.RELEASE:
                return clock.release()
            clock.release()
            return clock.acquire()
        return clock.fence()

    # -- commit plumbing -----------------------------------------------

    def _finish_load(self, op: MemOp, idx: int, token: ValueToken, ts: int,
                     step: int, pre_read_ts: int, fwd: bool = False) -> None:
        if op.kind is OpKind.SPIN:
            self.commit_memory(idx, op.kind, op.addr, token, ts, step,
                               pre_read_ts, fwd=fwd)
            if token.literal == op.value:
                self.pc = idx + 1
            else:
                self.sleep_left = self.SPIN_PAUSE
            return
        if op.reg:
            self.regs[op.reg] = token.literal
        self.commit_memory(idx, op.kind, op.addr, token, ts, step,
                           pre_read_ts, fwd=fwd)
        self.pc = idx + 1

    def commit_memory(self, idx: int, kind: OpKind, addr: int,
                      token: ValueToken, ts: int, step: int,
                      pre_read_ts: int, fwd: bool = False) -> TraceOp:
        self.seq += 1
        row = TraceOp(self.cid, idx, kind, addr, token, ts, step, self.seq,
                      fwd=fwd)
        self.sim.trace_append(row)
        self.committed_step = step
        if kind is OpKind.STORE:
            self.sim.counters.stores += 1
        else:
            self.sim.counters.loads += 1
        if self.detector is not None and self.clock.read_ts > pre_read_ts:
            self.detector.reset_on_ts_advance()
        self.access_count += 1
        if self.access_count >= self.si_period and self.waiting is None:
            self.clock.self_increment()
            self.access_count = 0
        if self.sim.cfg.fence_each_op and self.clock.model in (
                MemoryModel.TSO, MemoryModel.PSO):
            self.clock.fence()
        return row

    # -- protocol hooks -------------------------------------------------

    def _load(self, op: MemOp, step: int) -> None:
        raise NotImplementedError

    def _drain_issue(self, entry: StoreEntry, step: int) -> None:
        raise NotImplementedError

    def handle(self, msg: Msg, step: int) -> None:
        raise NotImplementedError

    def state_key(self) -> tuple:
        c = self.clock
        return (self.pc, tuple(sorted(self.regs.items())),
                (c.pts, c.lts, c.sts, c.acquire_ts, c.release_ts, c.max_ts),
                tuple((e.idx, e.addr, e.token.as_tuple()) for e in self.buffer),
                self.drain_inflight,
                self.waiting["idx"] if self.waiting else None,
                self.sleep_left, self.store_seq)


# ---------------------------------------------------------------------------
# the timed simulator


def _build_parts(sim, program: Program):
    if sim.cfg.protocol == "tardis":
        from .tardis import TardisCore, TardisLlc
        cores = [TardisCore(sim, cid, ops) for cid, ops in enumerate(program.cores)]
        llc = TardisLlc(sim)
    else:
        from .directory import DirectoryCore, DirectoryLlc
        cores = [DirectoryCore(sim, cid, ops) for cid, ops in enumerate(program.cores)]
        llc = DirectoryLlc(sim)
    return cores, llc


class Simulator:
    def __init__(self, cfg: SimConfig, program: Program,
                 auditor=None, record_renewals: bool = False):
        if program.n_cores != cfg.cores:
            cfg = replace(cfg, cores=program.n_cores)
        self.cfg = cfg
        self.program = program
        self.step = 0
        self.rng = random.Random(cfg.seed)
        self.mem = MainMemory()
        self.ledger = TrafficLedger()
        self.counters = Counters(record_renewals=record_renewals)
        self.trace: list[TraceOp] = []
        self._queue: list = []
        self._msg_seq = 0
        self.auditor = auditor
        self._touched: set[int] = set()
        self.cores, self.llc = _build_parts(self, program)
        _apply_warm(self)
        if auditor is not None:
            auditor.attach(self)

    # -- fabric interface (also implemented by the enumerator) ----------

    def send(self, msg: Msg) -> None:
        cfg = self.cfg
        flits = msg.flits(cfg.data_flits)
        if msg.kind in (MsgKind.MEM_READ, MsgKind.MEM_DATA, MsgKind.MEM_WRITE):
            hops = 1
            half = cfg.dram_latency // 2
            latency = {MsgKind.MEM_READ: cfg.dram_latency - half,
                       MsgKind.MEM_DATA: half,
                       MsgKind.MEM_WRITE: half}[msg.kind]
            latency = max(1, latency)
        else:
            home = cfg.home_tile(msg.addr)
            core_end = msg.src if msg.src >= 0 else msg.dst
            hops = cfg.hops(core_end, home)
            latency = max(1, hops * cfg.hop_cycles)
        self.ledger.add(traffic_class(msg.kind), flits, hops)
        self._msg_seq += 1
        heapq.heappush(self._queue, (self.step + latency, self._msg_seq, msg))

    def trace_append(self, row: TraceOp) -> None:
        self.trace.append(row)
        self.touch(row.addr)
        if self.auditor is not None:
            self.auditor.on_commit(row)

    def touch(self, addr) -> None:
        if self.auditor is not None and addr is not None:
            self._touched.add(addr)

    # -- run loop --------------------------------------------------------

    def net_empty(self) -> bool:
        return not self._queue

    def all_done(self) -> bool:
        return all(c.done for c in self.cores)

    def tick(self) -> None:
        self.step += 1
        while self._queue and self._queue[0][0] <= self.step:
            _, _, msg = heapq.heappop(self._queue)
            self.route(msg)
        for cid in self._turn_order():
            self.cores[cid].turn(self.step)
        if self.auditor is not None and self._touched:
            self.auditor.on_tick(self._touched)
            self._touched.clear()

    def route(self, msg: Msg) -> None:
        if msg.dst == MEM:
            self._mem_handle(msg)
        elif msg.dst == LLC:
            self.llc.handle(msg, self.step)
        else:
            self.cores[msg.dst].handle(msg, self.step)

    def _mem_handle(self, msg: Msg) -> None:
        if msg.kind is MsgKind.MEM_READ:
            line = self.mem.read(msg.addr)
            self.send(Msg(MsgKind.MEM_DATA, msg.addr, MEM, LLC, data=True,
                          value=line.value, wts=line.wts, rts=line.rts,
                          lease=line.lease))
        elif msg.kind is MsgKind.MEM_WRITE:
            self.mem.write(msg.addr, msg.value, msg.wts, msg.rts, msg.lease)

    def _turn_order(self):
        sched = self.program.schedule
        n = len(self.cores)
        if sched == "sequential":
            for cid in range(n):
                if not self.cores[cid].done:
                    return [cid]
            return []
        if sched == "lockstep":
            return list(range(n))
        skip = self.cfg.skip_prob
        return [cid for cid in range(n) if self.rng.random() >= skip]

    def run(self):
        from .metrics import build_report
        limit = self.cfg.max_steps
        while not self.all_done():
            if self.step >= limit:
                raise StepLimitError(f"exceeded {limit} steps\n{self._dump()}")
            self.tick()
            if (self.net_empty() and not self.all_done()
                    and not any(c.can_progress_locally() for c in self.cores)):
                raise DeadlockError("no core can advance and the network is "
                                    f"idle\n{self._dump()}")
        # fire-and-forget traffic (freshness checks, eviction writebacks
        # triggered by the last fill) may still be in flight; let it land
        while not self.net_empty():
            if self.step >= limit:
                raise StepLimitError(f"exceeded {limit} steps\n{self._dump()}")
            self.tick()
        assert self.net_empty(), "run finished with messages in flight"
        self.trace.sort(key=lambda r: (r.core, r.idx, r.seq))
        if self.auditor is not None:
            self.auditor.on_run_end()
        return build_report(self)

    def _dump(self) -> str:
        lines = [f"step={self.step} queue={len(self._queue)}"]
        for c in self.cores:
            lines.append(
                f"  core {c.cid}: pc={c.pc}/{len(c.ops)} waiting={c.waiting}"
                f" buffer={len(c.buffer)} inflight={c.drain_inflight}"
                f" sleep={c.sleep_left}")
        return "\n".join(lines)

    def outcome(self) -> tuple:
        return tuple(self.cores[cid].regs.get(reg, 0)
                     for cid, reg in self.program.registers())

def _apply_warm(fabric) -> None:
    from .cachemem import CacheLine, LineState, initial_token
    for warm in fabric.program.warm:
        tok = initial_token(warm.addr)
        fabric.mem.write(warm.addr, tok, warm.wts, warm.rts)
        fabric.llc.warm_install(warm.addr, tok, warm.wts, warm.rts,
                                sharers=warm.in_l1)
        for cid in warm.in_l1:
            line = CacheLine(addr=warm.addr, state=LineState.S,
                             wts=warm.wts, rts=warm.rts, value=tok)
            fabric.cores[cid].l1.insert(line)


def run_program(cfg: SimConfig, program: Program, **kw):
    sim = Simulator(cfg, program, **kw)
    report = sim.run()
    return sim, report


# ---------------------------------------------------------------------------
# exhaustive enumeration


class _World:
    """Fabric for enumeration: same component interface as Simulator but
    messages sit in per-channel FIFOs until the search delivers them."""

    def __init__(self, cfg: SimConfig, program: Program):
        if program.n_cores != cfg.cores:
            cfg = replace(cfg, cores=program.n_cores)
        self.cfg = cfg
        self.program = program
        self.step = 0
        self.mem = MainMemory()
        self.ledger = TrafficLedger()
        self.counters = Counters()
        self.auditor = None
        self.cores, self.llc = _build_parts(self, program)
        self.channels: dict[tuple, list] = {}
        _apply_warm(self)

    def send(self, msg: Msg) -> None:
        self.ledger.add(traffic_class(msg.kind), msg.flits(self.cfg.data_flits), 1)
        self.channels.setdefault((msg.src, msg.dst), []).append(msg)

    def trace_append(self, row: TraceOp) -> None:
        pass

    def touch(self, addr) -> None:
        pass

    def actions(self) -> list:
        acts = []
        for ch, q in sorted(self.channels.items()):
            if q:
                acts.append(("deliver", ch))
        for core in self.cores:
            if core.done or core.waiting is not None:
                pass
            elif core.pc < len(core.ops) and self._op_enabled(core):
                acts.append(("op", core.cid))
            if core.buffer and not core.drain_inflight:
                acts.append(("drain", core.cid))
        return acts

    def _op_enabled(self, core) -> bool:
        if core.buffer_cap == 0 and core.buffer:
            return False
        op = core.ops[core.pc]
        k = op.kind
        if k is OpKind.STORE:
            return len(core.buffer) < max(core.buffer_cap, 1)
        if k in (OpKind.FENCE, OpKind.ACQUIRE, OpKind.RELEASE):
            model = core.clock.model
            drains = not (model is MemoryModel.RC and k is OpKind.ACQUIRE)
            return not (drains and core.buffer)
        return True

    def apply(self, action) -> None:
        self.step += 1
        what, arg = action
        if what == "deliver":
            q = self.channels[arg]
            msg = q.pop(0)
            if not q:
                del self.channels[arg]
            if msg.dst == MEM:
                line = self.mem.read(msg.addr)
                if msg.kind is MsgKind.MEM_READ:
                    self.send(Msg(MsgKind.MEM_DATA, msg.addr, MEM, LLC,
                                  data=True, value=line.value, wts=line.wts,
                                  rts=line.rts, lease=line.lease))
                elif msg.kind is MsgKind.MEM_WRITE:
                    self.mem.write(msg.addr, msg.value, msg.wts, msg.rts,
                                   msg.lease)
            elif msg.dst == LLC:
                self.llc.handle(msg, self.step)
            else:
                self.cores[msg.dst].handle(msg, self.step)
        elif what == "op":
            core = self.cores[arg]
            # skip pure waits instantly: enumeration has no clock
            while (core.pc < len(core.ops)
                   and core.ops[core.pc].kind is OpKind.SLEEP):
                core.pc += 1
            if core.pc < len(core.ops):
                core.exec_op(self.step)
            core.sleep_left = 0
        else:
            core = self.cores[arg]
            core._drain_issue(core.buffer[0], self.step)

    def terminal(self) -> bool:
        return not self.channels and all(c.done for c in self.cores)

    def key(self) -> tuple:
        chans = tuple(
            (ch, tuple(_msg_key(m) for m in q))
            for ch, q in sorted(self.channels.items()) if q)
        return (tuple(c.state_key() for c in self.cores),
                self.llc.state_key(),
                tuple(sorted((a, l.value.as_tuple(), l.wts, l.rts)
                             for a, l in self.mem.lines.items())),
                chans)

    def outcome(self) -> tuple:
        return tuple(self.cores[cid].regs.get(reg, 0)
                     for cid, reg in self.program.registers())


def _msg_key(m: Msg) -> tuple:
    return (m.kind.value, m.addr, m.src, m.dst, m.data,
            m.value.as_tuple() if m.value else None,
            m.wts, m.rts, m.req_ts, m.req_wts, m.req_lease, m.lease,
            m.floor, m.excl, m.success, m.updated, m.downgrade,
            m.extend_ts, m.requester, m.acks)


ENUM_OP_LIMIT = 10


def enumerate_outcomes(program: Program, model: str, protocol: str = "tardis",
                       cfg: SimConfig | None = None,
                       state_limit: int = 2_000_000) -> set:
    """Every register outcome reachable under the protocol, over all
    interleavings of core micro-steps and message deliveries."""
    if program.dynamic_ops() > ENUM_OP_LIMIT:
        raise ValueError(f"enumeration is limited to {ENUM_OP_LIMIT} ops, "
                         f"program has {program.dynamic_ops()}")
    for ops in program.cores:
        for op in ops:
            if op.kind is OpKind.SPIN:
                raise ValueError("conditional spins cannot be enumerated")
    if cfg is None:
        cfg = SimConfig(protocol=protocol, model=model,
                        cores=max(1, program.n_cores), mesi=False,
                        livelock_detector=False, lease_predictor=False,
                        self_increment_period=10**9)
    else:
        cfg = replace(cfg, protocol=protocol, model=model,
                      cores=max(1, program.n_cores),
                      self_increment_period=10**9)
    prog = Program(program.name, program.cores, warm=program.warm,
                   schedule=None, addr_names=program.addr_names)
    root = _World(cfg, prog)
    seen = set()
    outcomes = set()
    stack = [root]
    while stack:
        world = stack.pop()
        key = world.key()
        if key in seen:
            continue
        seen.add(key)
        if len(seen) > state_limit:
            raise SimulationError("enumeration state limit exceeded")
        if world.terminal():
            outcomes.add(world.outcome())
            continue
        acts = world.actions()
        if not acts:
            raise DeadlockError(f"enumeration wedged: {world.key()}")
        for action in acts:
            nxt = copy.deepcopy(world)
            nxt.apply(action)
            stack.append(nxt)
    return outcomes
