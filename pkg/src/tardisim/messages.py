"""Coherence messages and their traffic taxonomy.

Endpoints are small ints: cores are 0..n-1, the shared cache is LLC,
main memory is MEM.  Every message belongs to exactly one accounting
class: common (demand traffic, recalls, writebacks), renew (renewals
and stale-read checks), invalidation (directory invalidations and
shared-eviction notices), or dram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto

from .cachemem import MIN_LEASE, ValueToken

LLC = -1
MEM = -2


class MsgKind(Enum):
    # tardis protocol
    LOAD_REQ = auto()
    STORE_REQ = auto()
    RENEW_REQ = auto()
    CHECK_REQ = auto()
    LOAD_RESP = auto()      # shared grant
    EXCL_RESP = auto()      # exclusive grant (store, or E on a load)
    RENEW_RESP = auto()
    CHECK_RESP = auto()
    RECALL = auto()         # LLC asks an owner to downgrade or drop
    WB_RESP = auto()        # owner's answer to a RECALL
    WRITEBACK = auto()      # unsolicited M/E eviction writeback
    # directory protocol
    GETS = auto()
    GETM = auto()
    DATA_RESP = auto()
    INV = auto()
    INV_ACK = auto()
    FWD_GETS = auto()
    FWD_GETM = auto()
    FWD_RESP = auto()
    PUTS = auto()
    PUTS_ACK = auto()
    PUTM = auto()
    PUTM_ACK = auto()
    # dram
    MEM_READ = auto()
    MEM_DATA = auto()
    MEM_WRITE = auto()


RENEW_CLASS = {MsgKind.RENEW_REQ, MsgKind.RENEW_RESP, MsgKind.CHECK_REQ, MsgKind.CHECK_RESP}
INVAL_CLASS = {MsgKind.INV, MsgKind.INV_ACK, MsgKind.PUTS, MsgKind.PUTS_ACK}
DRAM_CLASS = {MsgKind.MEM_READ, MsgKind.MEM_DATA, MsgKind.MEM_WRITE}


def traffic_class(kind: MsgKind) -> str:
    if kind in RENEW_CLASS:
        return "renew"
    if kind in INVAL_CLASS:
        return "invalidation"
    if kind in DRAM_CLASS:
        return "dram"
    return "common"


# recall downgrade targets
TO_S = "s"
TO_I = "i"


@dataclass
class Msg:
    kind: MsgKind
    addr: int
    src: int
    dst: int
    req_id: int = 0
    data: bool = False              # carries a full line (drives flit size)
    value: ValueToken | None = None
    wts: int = 0
    rts: int = 0
    req_ts: int = 0                 # requester's read-side timestamp
    req_wts: int = 0                # renew/check: wts of the requester's copy
    req_lease: int = MIN_LEASE      # renew: lease echoed back for prediction
    lease: int = MIN_LEASE          # grant: lease the response was issued with
    floor: int = 0                  # exclusive grant: min store timestamp
    excl: bool = False              # load response grants E instead of S
    success: bool = True            # renew response
    updated: bool = False           # check response
    downgrade: str = TO_S           # recall target state
    extend_ts: int | None = None    # recall: extend rts to extend_ts + lease
    requester: int = -3             # directory fwd: the core being served
    acks: int = 0                   # directory: invalidations to wait for
    have_line: bool = False         # store request: upgrade of a shared copy
    recalled: bool = False          # set at the home while queued behind a recall

    def flits(self, data_flits: int) -> int:
        return 1 + (data_flits if self.data else 0)
