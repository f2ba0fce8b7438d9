"""Timestamp-based coherence.

No invalidations: shared copies are leases (valid through rts) that
expire in logical time, and a writer simply claims a timestamp above
every lease the home node has granted.  The LLC keeps the master copy
unless a single owner holds the line exclusively, in which case
requests recall it — to shared for reads (the owner keeps a snapshot
and its lease is extended along with everyone else's), to invalid for
writes.

Expired shared copies are renewed in place: if the line was not
written since (the requester's wts still matches), the home extends
rts and answers with a control message instead of a data transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cachemem import (CacheLine, LineState, LlcLine, MIN_LEASE,
                       SetAssocCache, ValueToken)
from .engine import BaseCore, StoreEntry
from .leasepred import READ, RENEW, WRITE, predict
from .livelock import LivelockDetector
from .messages import LLC, MEM, Msg, MsgKind, TO_I, TO_S
from .workloads import MemOp, OpKind

M, E, S = LineState.M, LineState.E, LineState.S


class TardisCore(BaseCore):
    def __init__(self, sim, cid, ops):
        super().__init__(sim, cid, ops)
        cfg = sim.cfg
        self.l1 = SetAssocCache(cfg.l1_kb, cfg.l1_ways, cfg.line_bytes)
        if cfg.livelock_detector:
            self.detector = LivelockDetector(
                entries=cfg.ahb_entries, min_count=cfg.thresh_min,
                max_count=cfg.thresh_max, check_thresh=cfg.check_thresh)
        self.check_out: set[int] = set()

    # -- loads -----------------------------------------------------------

    def _load(self, op: MemOp, step: int) -> None:
        addr = op.addr
        clock = self.clock
        line = self.l1.lookup(addr)
        pre = clock.read_ts
        if line is not None and line.state in (M, E):
            ts = clock.commit_load(line.wts, dirty_by_self=line.dirty)
            if ts > line.rts:
                # local lease extension: the owner stretches its own
                # window, no message needed
                line.rts = ts
                self.sim.touch(addr)
            self._finish_load(op, self.pc, line.value, ts, step, pre)
            return
        if line is not None and line.state is S and clock.read_ts <= line.rts:
            ts = clock.commit_load(line.wts)
            if (self.detector is not None and clock.read_ts == pre
                    and self.detector.on_shared_load(addr)):
                self._send_check(line)
            self._finish_load(op, self.pc, line.value, ts, step, pre)
            return
        if line is not None and line.state is S:
            # expired: ask the home to stretch the lease
            self.sim.counters.renew_reqs += 1
            self.sim.send(Msg(MsgKind.RENEW_REQ, addr, self.cid, LLC,
                              req_ts=clock.read_ts, req_wts=line.wts,
                              req_lease=line.lease))
        else:
            self.sim.send(Msg(MsgKind.LOAD_REQ, addr, self.cid, LLC,
                              req_ts=clock.read_ts))
        self.waiting = {"op": op, "idx": self.pc, "addr": addr}

    def _send_check(self, line: CacheLine) -> None:
        self.sim.counters.checks_sent += 1
        self.check_out.add(line.addr)
        self.sim.send(Msg(MsgKind.CHECK_REQ, line.addr, self.cid, LLC,
                          req_wts=line.wts))

    # -- stores ----------------------------------------------------------

    def _drain_issue(self, entry: StoreEntry, step: int) -> None:
        addr = entry.addr
        clock = self.clock
        line = self.l1.lookup(addr)
        if line is not None and line.state is M:
            pre = clock.read_ts
            ts = clock.commit_store(line.wts)
            line.wts = ts
            line.rts = max(line.rts, ts)
            line.value = entry.token
            line.dirty = True
            self.sim.touch(addr)
            self.buffer.pop(0)
            self.commit_memory(entry.idx, OpKind.STORE, addr, entry.token,
                               ts, step, pre)
            return
        if line is not None and line.state is E:
            # silent upgrade; the new version starts past the windows the
            # home could have promised before handing the line over
            pre = clock.read_ts
            ts = clock.commit_store(line.rts + 1)
            line.state = M
            line.wts = line.rts = ts
            line.value = entry.token
            line.dirty = True
            self.sim.touch(addr)
            self.buffer.pop(0)
            self.commit_memory(entry.idx, OpKind.STORE, addr, entry.token,
                               ts, step, pre)
            return
        self.drain_inflight = True
        self.sim.send(Msg(MsgKind.STORE_REQ, addr, self.cid, LLC,
                          have_line=line is not None))

    # -- incoming --------------------------------------------------------

    def handle(self, msg: Msg, step: int) -> None:
        kind = msg.kind
        if kind is MsgKind.LOAD_RESP:
            ctx = self.waiting
            assert ctx is not None and ctx["addr"] == msg.addr
            self.waiting = None
            line = self._install(CacheLine(
                addr=msg.addr, state=E if msg.excl else S, wts=msg.wts,
                rts=msg.rts, value=msg.value, lease=msg.lease))
            pre = self.clock.read_ts
            ts = self.clock.commit_load(line.wts)
            if ts > line.rts:
                assert line.state is E
                line.rts = ts
            self._finish_load(ctx["op"], ctx["idx"], line.value, ts, step, pre)
        elif kind is MsgKind.RENEW_RESP:
            ctx = self.waiting
            assert ctx is not None and ctx["addr"] == msg.addr
            self.waiting = None
            line = self.l1.lookup(msg.addr)
            assert line is not None and line.state is S
            if self.sim.counters.record_renewals:
                self.sim.counters.renew_events.append(
                    (self.cid, msg.addr, ctx["idx"], msg.success))
            if msg.success:
                line.rts = max(line.rts, msg.rts)
            else:
                line.wts, line.rts = msg.wts, msg.rts
                line.value = msg.value
            line.lease = msg.lease
            self.sim.touch(msg.addr)
            pre = self.clock.read_ts
            ts = self.clock.commit_load(line.wts)
            self._finish_load(ctx["op"], ctx["idx"], line.value, ts, step, pre)
        elif kind is MsgKind.EXCL_RESP:
            entry = self.buffer[0]
            assert self.drain_inflight and entry.addr == msg.addr
            self.drain_inflight = False
            pre = self.clock.read_ts
            ts = self.clock.commit_store(msg.floor)
            line = self.l1.lookup(msg.addr)
            if line is None:
                line = self._install(CacheLine(addr=msg.addr, state=M))
            line.state = M
            line.wts = line.rts = ts
            line.value = entry.token
            line.dirty = True
            self.sim.touch(msg.addr)
            self.buffer.pop(0)
            self.commit_memory(entry.idx, OpKind.STORE, msg.addr, entry.token,
                               ts, step, pre)
        elif kind is MsgKind.CHECK_RESP:
            self.check_out.discard(msg.addr)
            if self.detector is not None:
                self.detector.on_check_response(msg.updated)
            if msg.updated:
                line = self.l1.lookup(msg.addr)
                if line is not None and line.state is S:
                    line.wts, line.rts = msg.wts, msg.rts
                    line.value = msg.value
                    line.lease = msg.lease
                    self.sim.touch(msg.addr)
        elif kind is MsgKind.RECALL:
            self._recall(msg)
        else:
            raise AssertionError(f"core got {kind}")

    def _recall(self, msg: Msg) -> None:
        line = self.l1.lookup(msg.addr, touch=False)
        if line is None or line.state is S:
            # our writeback is already on its way; FIFO delivery means the
            # home merges it before this answer arrives
            self.sim.send(Msg(MsgKind.WB_RESP, msg.addr, self.cid, LLC,
                              data=False))
            return
        was_dirty = line.dirty
        if msg.downgrade == TO_S:
            line.state = S
            line.dirty = False
            if msg.extend_ts is not None:
                line.rts = max(line.rts, msg.extend_ts + msg.lease)
                line.lease = msg.lease
        else:
            self.l1.remove(msg.addr)
        self.sim.touch(msg.addr)
        self.sim.send(Msg(MsgKind.WB_RESP, msg.addr, self.cid, LLC,
                          data=was_dirty, value=line.value,
                          wts=line.wts, rts=line.rts))

    # -- cache insertion ---------------------------------------------------

    def _install(self, line: CacheLine) -> CacheLine:
        l1 = self.l1
        if not l1.has_room(line.addr):
            locked = self.waiting["addr"] if self.waiting else None
            victim = l1.lru_victim(line.addr, avoid=lambda l: l.addr == locked)
            assert victim is not None, "every way locked"
            l1.remove(victim.addr)
            self.sim.touch(victim.addr)
            if victim.state in (M, E):
                self.sim.send(Msg(MsgKind.WRITEBACK, victim.addr, self.cid,
                                  LLC, data=True, value=victim.value,
                                  wts=victim.wts, rts=victim.rts))
            # shared victims just vanish; their lease expires on its own
        l1.insert(line)
        self.sim.touch(line.addr)
        return line

    def state_key(self) -> tuple:
        lines = tuple(sorted(
            (l.addr, l.state.value, l.wts, l.rts, l.value.as_tuple(), l.dirty,
             l.lease) for l in self.l1.lines()))
        return super().state_key() + (lines, tuple(sorted(self.check_out)))


# ---------------------------------------------------------------------------


@dataclass
class _Pending:
    queue: list = field(default_factory=list)
    recall_out: bool = False
    recall_target: int | None = None
    fill_out: bool = False
    parked_fill: Msg | None = None   # MEM_DATA waiting for an eviction


class TardisLlc:
    def __init__(self, sim):
        self.sim = sim
        cfg = sim.cfg
        self.lines = SetAssocCache(cfg.llc_kb, cfg.llc_ways, cfg.line_bytes)
        self.pending: dict[int, _Pending] = {}
        self.evict_wait: dict[int, int] = {}   # victim addr -> fill addr

    def warm_install(self, addr: int, value: ValueToken, wts: int,
                     rts: int, sharers=()) -> None:
        self.lines.insert(LlcLine(addr=addr, wts=wts, rts=rts, value=value))

    # -- entry -------------------------------------------------------------

    def handle(self, msg: Msg, step: int) -> None:
        kind = msg.kind
        if kind in (MsgKind.WRITEBACK, MsgKind.WB_RESP):
            self._merge(msg)
        elif kind is MsgKind.MEM_DATA:
            self._fill(msg)
        else:
            self.sim.counters.llc_accesses += 1
            pend = self.pending.get(msg.addr)
            if pend is not None:
                msg.recalled = pend.recall_out
                pend.queue.append(msg)
                return
            line = self.lines.lookup(msg.addr)
            if line is None:
                self._start_fill(msg)
            elif line.owner is not None:
                pend = self.pending.setdefault(msg.addr, _Pending())
                msg.recalled = True
                pend.queue.append(msg)
                if msg.addr not in self.evict_wait:
                    self._send_recall(line, msg, pend)
            else:
                self._serve(msg, line)

    # -- serving a shared (home-mastered) line ------------------------------

    def _lease_for(self, line: LlcLine, req: Msg) -> int:
        cfg = self.sim.cfg
        if not cfg.lease_predictor:
            return cfg.static_lease
        if req.kind is MsgKind.STORE_REQ:
            line.cur_lease = predict(line.cur_lease, WRITE)
        elif req.kind is MsgKind.RENEW_REQ:
            line.cur_lease = predict(line.cur_lease, RENEW, req.req_lease)
        else:
            line.cur_lease = predict(line.cur_lease, READ)
        return line.cur_lease

    def _serve(self, msg: Msg, line: LlcLine) -> None:
        cfg = self.sim.cfg
        kind = msg.kind
        if kind is MsgKind.LOAD_REQ:
            if cfg.mesi and line.e_bit and not msg.recalled:
                line.e_bit = False
                line.owner = msg.src
                self.sim.touch(msg.addr)
                self.sim.send(Msg(MsgKind.LOAD_RESP, msg.addr, LLC, msg.src,
                                  data=True, excl=True, value=line.value,
                                  wts=line.wts, rts=line.rts,
                                  lease=line.cur_lease))
                return
            lease = self._lease_for(line, msg)
            line.rts = max(line.rts, msg.req_ts + lease)
            line.e_bit = False
            self.sim.touch(msg.addr)
            self.sim.send(Msg(MsgKind.LOAD_RESP, msg.addr, LLC, msg.src,
                              data=True, value=line.value, wts=line.wts,
                              rts=line.rts, lease=lease))
        elif kind is MsgKind.RENEW_REQ:
            lease = self._lease_for(line, msg)
            line.rts = max(line.rts, msg.req_ts + lease)
            self.sim.touch(msg.addr)
            if msg.req_wts == line.wts:
                self.sim.counters.renew_ok += 1
                self.sim.send(Msg(MsgKind.RENEW_RESP, msg.addr, LLC, msg.src,
                                  success=True, data=False, rts=line.rts,
                                  lease=lease))
            else:
                # stale data: the lease still moves, but the reply must
                # carry the current version
                self.sim.counters.renew_fail += 1
                self.sim.send(Msg(MsgKind.RENEW_RESP, msg.addr, LLC, msg.src,
                                  success=False, data=True, value=line.value,
                                  wts=line.wts, rts=line.rts, lease=lease))
        elif kind is MsgKind.CHECK_REQ:
            if msg.req_wts == line.wts:
                self.sim.send(Msg(MsgKind.CHECK_RESP, msg.addr, LLC, msg.src,
                                  updated=False, data=False))
            else:
                self.sim.send(Msg(MsgKind.CHECK_RESP, msg.addr, LLC, msg.src,
                                  updated=True, data=True, value=line.value,
                                  wts=line.wts, rts=line.rts,
                                  lease=line.cur_lease))
        elif kind is MsgKind.STORE_REQ:
            floor = line.rts + 1
            self._lease_for(line, msg)
            line.owner = msg.src
            line.e_bit = False
            self.sim.touch(msg.addr)
            self.sim.send(Msg(MsgKind.EXCL_RESP, msg.addr, LLC, msg.src,
                              data=not msg.have_line, floor=floor))
        else:
            raise AssertionError(f"llc got {kind}")

    # -- recalls and writebacks ---------------------------------------------

    def _send_recall(self, line: LlcLine, first: Msg, pend: _Pending) -> None:
        if first.kind is MsgKind.STORE_REQ:
            down, extend, lease = TO_I, None, MIN_LEASE
        elif first.kind is MsgKind.CHECK_REQ:
            down, extend, lease = TO_S, None, MIN_LEASE
        else:
            down = TO_S
            extend = first.req_ts
            lease = (line.cur_lease if self.sim.cfg.lease_predictor
                     else self.sim.cfg.static_lease)
        pend.recall_out = True
        pend.recall_target = line.owner
        self.sim.send(Msg(MsgKind.RECALL, line.addr, LLC, line.owner,
                          downgrade=down, extend_ts=extend, lease=lease))

    def _merge(self, msg: Msg) -> None:
        addr = msg.addr
        line = self.lines.lookup(addr, touch=False)
        if line is None:
            return  # answer for a line the home has already evicted
        pend = self.pending.get(addr)
        if msg.kind is MsgKind.WRITEBACK:
            if line.owner != msg.src:
                return  # eviction notice from a previous owner
        else:
            wanted = pend is not None and pend.recall_out \
                and pend.recall_target == msg.src
            evicting = addr in self.evict_wait \
                and self.evict_wait[addr][1] == msg.src
            if not (wanted or evicting):
                return  # a writeback already settled this recall
        if msg.data:
            line.value = msg.value
            line.wts = msg.wts
        line.rts = max(line.rts, msg.rts)
        line.owner = None
        line.e_bit = True
        self.sim.touch(addr)
        if pend is not None:
            pend.recall_out = False
            pend.recall_target = None
        if addr in self.evict_wait:
            self._finish_eviction(addr)
        else:
            self._drain_pending(addr)

    def _drain_pending(self, addr: int) -> None:
        pend = self.pending.get(addr)
        if pend is None:
            return
        if pend.fill_out or pend.parked_fill is not None or pend.recall_out:
            return
        while pend.queue:
            line = self.lines.lookup(addr)
            assert line is not None
            if line.owner is not None:
                self._send_recall(line, pend.queue[0], pend)
                return
            self._serve(pend.queue.pop(0), line)
        del self.pending[addr]

    # -- misses and capacity --------------------------------------------------

    def _start_fill(self, msg: Msg) -> None:
        pend = self.pending.setdefault(msg.addr, _Pending())
        pend.queue.append(msg)
        if not pend.fill_out:
            pend.fill_out = True
            self.sim.send(Msg(MsgKind.MEM_READ, msg.addr, LLC, MEM))

    def _fill(self, msg: Msg) -> None:
        addr = msg.addr
        pend = self.pending.get(addr)
        assert pend is not None and pend.fill_out
        pend.fill_out = False
        if self.lines.has_room(addr):
            self._install_fill(msg)
            self._drain_pending(addr)
            return
        busy = set(self.pending) | set(self.evict_wait)
        victim = self.lines.lru_victim(addr, avoid=lambda l: l.addr in busy
                                       or l.owner is not None)
        if victim is not None:
            self._evict(victim)
            self._install_fill(msg)
            self._drain_pending(addr)
            return
        # every candidate is owned: recall one and park the fill
        victim = self.lines.lru_victim(addr, avoid=lambda l: l.addr in busy)
        assert victim is not None, "llc set wedged on busy lines"
        pend.parked_fill = msg
        self.evict_wait[victim.addr] = (addr, victim.owner)
        self.sim.send(Msg(MsgKind.RECALL, victim.addr, LLC, victim.owner,
                          downgrade=TO_I, extend_ts=None))

    def _finish_eviction(self, victim_addr: int) -> None:
        fill_addr, _ = self.evict_wait.pop(victim_addr)
        victim = self.lines.lookup(victim_addr, touch=False)
        self._evict(victim)
        pend = self.pending[fill_addr]
        msg, pend.parked_fill = pend.parked_fill, None
        self._install_fill(msg)
        self._drain_pending(fill_addr)
        # demand traffic may have queued on the victim while it was going
        leftover = self.pending.get(victim_addr)
        if leftover is not None and leftover.queue and not leftover.fill_out:
            leftover.recall_out = False
            leftover.recall_target = None
            leftover.fill_out = True
            self.sim.send(Msg(MsgKind.MEM_READ, victim_addr, LLC, MEM))

    def _evict(self, victim: LlcLine) -> None:
        self.lines.remove(victim.addr)
        self.sim.touch(victim.addr)
        self.sim.send(Msg(MsgKind.MEM_WRITE, victim.addr, LLC, MEM, data=True,
                          value=victim.value, wts=victim.wts, rts=victim.rts,
                          lease=victim.cur_lease))

    def _install_fill(self, msg: Msg) -> None:
        self.lines.insert(LlcLine(addr=msg.addr, wts=msg.wts, rts=msg.rts,
                                  value=msg.value, e_bit=True,
                                  cur_lease=msg.lease))
        self.sim.touch(msg.addr)

    def state_key(self) -> tuple:
        lines = tuple(sorted(
            (l.addr, l.wts, l.rts, l.value.as_tuple(), l.owner, l.e_bit,
             l.cur_lease) for l in self.lines.lines()))
        pend = tuple(sorted(
            (a, tuple(_req_key(m) for m in p.queue), p.recall_out,
             p.recall_target, p.fill_out, p.parked_fill is not None)
            for a, p in self.pending.items()))
        return (lines, pend, tuple(sorted(self.evict_wait.items())))


def _req_key(m: Msg) -> tuple:
    return (m.kind.value, m.src, m.req_ts, m.req_wts, m.req_lease,
            m.have_line, m.recalled)
