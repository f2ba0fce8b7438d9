"""Axiomatic consistency checking.

A committed-operation trace is correct when (1) every same-core pair
the memory model keeps ordered is ordered in physiological time
(timestamp first, physical commit step second, core/sequence as the
final tie-break), and (2) every load returns the newest store that is
either physiologically before it or earlier in its own program order —
the second disjunct is what lets a relaxed core read its own buffered
store early, and it drops out under SC where stores cannot be passed.

`oracle_outcomes` answers the same question model-side instead of
trace-side: it enumerates every linear arrangement of a small program
that respects the model's ordering rules and collects the register
results, giving an implementation-independent reference set.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby

from .cachemem import initial_token
from .consistency import MemoryModel
from .workloads import OpKind, Program

LOADISH = (OpKind.LOAD, OpKind.SPIN)


def ordered(model: MemoryModel, a: OpKind, b: OpKind,
            same_addr: bool = False) -> bool:
    """Must op a stay before op b (same core, a earlier in program order)?"""
    if a is OpKind.FENCE or b is OpKind.FENCE:
        return True
    if model is MemoryModel.RC:
        if a is OpKind.ACQUIRE or b is OpKind.RELEASE:
            return True
        if a is OpKind.RELEASE and b in (OpKind.ACQUIRE, OpKind.RELEASE):
            return True
        # per-location coherence: a store never passes a same-address
        # access (a load may still run ahead of an older same-address
        # store -- that is plain forwarding)
        return same_addr and b is OpKind.STORE
    if a in (OpKind.ACQUIRE, OpKind.RELEASE) or b in (OpKind.ACQUIRE,
                                                      OpKind.RELEASE):
        return True
    store_a = a is OpKind.STORE
    if model is MemoryModel.SC:
        return True
    if model is MemoryModel.TSO:
        return not (store_a and b in LOADISH)
    # PSO: only loads order later ordinary ops, same-address stores stay put
    if store_a:
        return b is OpKind.STORE and same_addr
    return True


@dataclass
class Violation:
    rule: str
    detail: str

    def __str__(self):
        return f"[{self.rule}] {self.detail}"


def check_trace(trace, model) -> list[Violation]:
    model = MemoryModel(model)
    out: list[Violation] = []
    rows = sorted(trace, key=lambda r: (r.core, r.idx, r.seq))

    # rule 1: required program-order pairs are physio-ordered
    for core, group in groupby(rows, key=lambda r: r.core):
        last: dict[OpKind, tuple] = {}
        last_row: dict[OpKind, object] = {}
        last_st_addr: dict[int, tuple] = {}
        for row in group:
            kind = OpKind.LOAD if row.kind is OpKind.SPIN else row.kind
            key = row.physio_key()
            worst = None
            for prev_kind, prev_key in last.items():
                if ordered(model, prev_kind, kind) and prev_key >= key:
                    if worst is None or prev_key > worst[0]:
                        worst = (prev_key, prev_kind)
            if worst is None and kind is OpKind.STORE:
                # same-address stores stay ordered under every model
                p = last_st_addr.get(row.addr)
                if p is not None and p >= key:
                    worst = (p, OpKind.STORE)
            if worst is not None:
                out.append(Violation(
                    "program-order",
                    f"core {core}: {worst[1].name}@{worst[0]} not before "
                    f"{kind.name} idx {row.idx}@{key}"))
            cur = last.get(kind)
            if cur is None or key > cur:
                last[kind] = key
            if kind is OpKind.STORE:
                p = last_st_addr.get(row.addr)
                if p is None or key > p:
                    last_st_addr[row.addr] = key

    # rule 2: loads read the newest store before them
    stores_by_addr: dict[int, list] = {}
    prior_by_core_addr: dict[tuple, list] = {}
    for row in rows:
        if row.kind is OpKind.STORE:
            stores_by_addr.setdefault(row.addr, []).append(row)
            prior_by_core_addr.setdefault((row.core, row.addr), []).append(row)
    for addr in stores_by_addr:
        stores_by_addr[addr].sort(key=lambda r: r.physio_key())

    for row in rows:
        if row.kind not in LOADISH:
            continue
        key = row.physio_key()
        instant = (row.ts, row.step)
        cand = None
        tied = []
        for st in stores_by_addr.get(row.addr, ()):
            if (st.ts, st.step) > instant:
                break
            if (st.ts, st.step) == instant:
                # a store sharing the load's instant is unordered against
                # it unless it is the same core's (sequence decides then);
                # either serialization of a cross-core tie is legal
                if st.core == row.core:
                    if st.seq < row.seq:
                        cand = st
                else:
                    tied.append(st)
                continue
            cand = st
        if model is not MemoryModel.SC:
            for st in prior_by_core_addr.get((row.core, row.addr), ()):
                if st.idx < row.idx:
                    if cand is None or st.physio_key() > cand.physio_key():
                        cand = st
        acceptable = {cand.value if cand is not None
                      else initial_token(row.addr)}
        acceptable.update(st.value for st in tied)
        if row.value not in acceptable:
            out.append(Violation(
                "value",
                f"core {row.core} idx {row.idx} read {row.value} from "
                f"addr {row.addr}, newest visible store was {acceptable}"))

    # conflicting writes may not share a physiological instant (a tied
    # load is resolved by the value it returns; two tied stores have no
    # defensible serialization)
    by_addr: dict[int, list] = {}
    for row in rows:
        if row.kind is OpKind.STORE:
            by_addr.setdefault(row.addr, []).append(row)
    for addr, group in by_addr.items():
        group.sort(key=lambda r: (r.ts, r.step))
        for _, tied in groupby(group, key=lambda r: (r.ts, r.step)):
            tied = list(tied)
            if len(tied) >= 2 and len({r.core for r in tied}) >= 2:
                out.append(Violation(
                    "simultaneous-conflict",
                    f"two stores to addr {addr} share instant "
                    f"({tied[0].ts},{tied[0].step})"))
    return out


# ---------------------------------------------------------------------------
# outcome oracle


ORACLE_OP_LIMIT = 8


def oracle_outcomes(program: Program, model) -> set:
    """All register outcomes the model's axioms admit for a small program."""
    model = MemoryModel(model)
    ops = []          # (core, idx, op)
    per_core = []
    for cid, core_ops in enumerate(program.cores):
        seq = [op for op in core_ops if op.kind is not OpKind.SLEEP]
        for op in seq:
            if op.kind is OpKind.SPIN:
                raise ValueError("conditional spins have no finite oracle")
        per_core.append(seq)
    total = sum(len(s) for s in per_core)
    if total > ORACLE_OP_LIMIT:
        raise ValueError(f"oracle is limited to {ORACLE_OP_LIMIT} ops, "
                         f"program has {total}")

    # preds[c][k] = indices j < k whose order over op k is required
    preds = []
    for cid, seq in enumerate(per_core):
        p = []
        for k, op in enumerate(seq):
            req = [j for j in range(k)
                   if ordered(model, seq[j].kind, op.kind,
                              same_addr=seq[j].addr == op.addr
                              and op.addr is not None)]
            p.append(req)
        preds.append(p)

    registers = program.registers()
    outcomes = set()
    n_cores = len(per_core)
    placed = [[False] * len(s) for s in per_core]

    def run(done: int, last_store: dict, regs: dict):
        if done == total:
            outcomes.add(tuple(regs.get(cr, 0) for cr in registers))
            return
        for cid in range(n_cores):
            seq = per_core[cid]
            for k in range(len(seq)):
                if placed[cid][k]:
                    continue
                if any(not placed[cid][j] for j in preds[cid][k]):
                    continue
                op = seq[k]
                placed[cid][k] = True
                if op.kind is OpKind.STORE:
                    saved = last_store.get(op.addr)
                    last_store[op.addr] = (cid, k, op.value)
                    run(done + 1, last_store, regs)
                    if saved is None:
                        del last_store[op.addr]
                    else:
                        last_store[op.addr] = saved
                elif op.kind is OpKind.LOAD:
                    # a program-earlier own store that is still unplaced
                    # lands later in the arrangement and therefore wins
                    val = None
                    if model is not MemoryModel.SC:
                        for j in range(k - 1, -1, -1):
                            o = seq[j]
                            if (o.kind is OpKind.STORE and o.addr == op.addr
                                    and not placed[cid][j]):
                                val = o.value
                                break
                    if val is None:
                        hit = last_store.get(op.addr)
                        val = hit[2] if hit is not None else 0
                    saved = regs.get((cid, op.reg)) if op.reg else None
                    had = op.reg and (cid, op.reg) in regs
                    if op.reg:
                        regs[(cid, op.reg)] = val
                    run(done + 1, last_store, regs)
                    if op.reg:
                        if had:
                            regs[(cid, op.reg)] = saved
                        else:
                            del regs[(cid, op.reg)]
                else:
                    run(done + 1, last_store, regs)
                placed[cid][k] = False

    run(0, {}, {})
    return outcomes
