"""Axiomatic trace checker and the small-program outcome oracle."""

import pytest

from tardisim.cachemem import ValueToken, initial_token
from tardisim.checker import check_trace, ordered, oracle_outcomes
from tardisim.consistency import MemoryModel
from tardisim.engine import TraceOp
from tardisim.workloads import OpKind, builtin, parse_program

SC, TSO, PSO, RC = (MemoryModel.SC, MemoryModel.TSO, MemoryModel.PSO,
                    MemoryModel.RC)
LD, ST, FE = OpKind.LOAD, OpKind.STORE, OpKind.FENCE
AQ, RL = OpKind.ACQUIRE, OpKind.RELEASE


def row(core, idx, kind, addr, value, ts, step, seq=None):
    return TraceOp(core, idx, kind, addr, value, ts, step,
                   seq if seq is not None else idx + 1)


# --- the per-model ordering predicate ----------------------------------


def test_sc_orders_everything():
    for a in (LD, ST):
        for b in (LD, ST):
            assert ordered(SC, a, b)


def test_tso_relaxes_store_to_load_only():
    assert not ordered(TSO, ST, LD)
    assert ordered(TSO, ST, ST)
    assert ordered(TSO, LD, ST)
    assert ordered(TSO, LD, LD)


def test_pso_relaxes_stores_except_same_address():
    assert not ordered(PSO, ST, LD)
    assert not ordered(PSO, ST, ST)
    assert ordered(PSO, ST, ST, same_addr=True)
    assert ordered(PSO, LD, ST)
    assert ordered(PSO, LD, LD)


def test_rc_orders_nothing_but_synchronization():
    for a in (LD, ST):
        for b in (LD, ST):
            assert not ordered(RC, a, b)
    assert ordered(RC, ST, ST, same_addr=True)
    assert ordered(RC, AQ, LD) and ordered(RC, AQ, ST)
    assert ordered(RC, LD, RL) and ordered(RC, ST, RL)
    assert ordered(RC, RL, AQ) and ordered(RC, RL, RL)
    assert not ordered(RC, LD, AQ)      # ops may float above an acquire
    assert not ordered(RC, RL, ST)      # and below a release


def test_fences_order_in_every_model():
    for model in (SC, TSO, PSO, RC):
        assert ordered(model, ST, FE) and ordered(model, FE, LD)


# --- check_trace rules --------------------------------------------------


def test_clean_sc_interleaving_passes():
    v1 = ValueToken(0, 1, 1)
    trace = [
        row(0, 0, ST, 0, v1, ts=1, step=10),
        row(1, 0, LD, 0, v1, ts=2, step=20),
    ]
    assert check_trace(trace, "sc") == []


def test_value_rule_catches_stale_read():
    v1 = ValueToken(0, 1, 1)
    trace = [
        row(0, 0, ST, 0, v1, ts=1, step=10),
        row(1, 0, LD, 0, initial_token(0), ts=2, step=20),  # reads past the store
    ]
    bad = check_trace(trace, "sc")
    assert [v.rule for v in bad] == ["value"]


def test_value_rule_catches_overwritten_read():
    v1, v2 = ValueToken(0, 1, 1), ValueToken(0, 2, 2)
    trace = [
        row(0, 0, ST, 0, v1, ts=1, step=10),
        row(0, 1, ST, 0, v2, ts=2, step=20, seq=2),
        row(1, 0, LD, 0, v1, ts=5, step=50),    # v2 is newer and visible
    ]
    assert [v.rule for v in check_trace(trace, "sc")] == ["value"]


def test_program_order_rule_is_model_sensitive():
    # a store physio-ordered after a later load: illegal under SC,
    # exactly the relaxation TSO grants
    trace = [
        row(0, 0, ST, 0, ValueToken(0, 1, 1), ts=5, step=50),
        row(0, 1, LD, 64, initial_token(64), ts=3, step=30, seq=2),
    ]
    assert [v.rule for v in check_trace(trace, "sc")] == ["program-order"]
    assert check_trace(trace, "tso") == []


def test_same_address_stores_must_stay_ordered_even_under_pso():
    v1, v2 = ValueToken(0, 1, 1), ValueToken(0, 2, 2)
    trace = [
        row(0, 0, ST, 0, v1, ts=9, step=90),
        row(0, 1, ST, 0, v2, ts=2, step=20, seq=2),
    ]
    assert any(v.rule == "program-order" for v in check_trace(trace, "pso"))


def test_store_buffer_forwarding_is_legal_outside_sc():
    # the load reads its own core's later-committed store
    v1 = ValueToken(0, 1, 1)
    trace = [
        row(0, 0, ST, 0, v1, ts=7, step=70),
        row(0, 1, LD, 0, v1, ts=2, step=20, seq=2),
    ]
    assert check_trace(trace, "tso") == []
    assert any(v.rule == "value" for v in check_trace(trace, "sc"))


def test_tied_stores_from_two_cores_conflict():
    trace = [
        row(0, 0, ST, 0, ValueToken(0, 1, 1), ts=4, step=40),
        row(1, 0, ST, 0, ValueToken(1, 1, 2), ts=4, step=40),
    ]
    assert [v.rule for v in check_trace(trace, "sc")] == ["simultaneous-conflict"]


def test_tied_load_store_resolves_by_value():
    # a load sharing a store's instant may read either side of the tie
    st = ValueToken(1, 1, 3)
    for read in (initial_token(0), st):
        trace = [
            row(1, 0, ST, 0, st, ts=4, step=40),
            row(0, 0, LD, 0, read, ts=4, step=40),
        ]
        assert check_trace(trace, "sc") == []
    trace = [
        row(1, 0, ST, 0, st, ts=4, step=40),
        row(0, 0, LD, 0, ValueToken(1, 9, 9), ts=4, step=40),
    ]
    assert [v.rule for v in check_trace(trace, "sc")] == ["value"]


# --- the outcome oracle --------------------------------------------------


def test_oracle_dekker_separates_sc_from_tso():
    p = builtin("dekker")
    sc = oracle_outcomes(p, "sc")
    tso = oracle_outcomes(p, "tso")
    assert (0, 0) not in sc
    assert (0, 0) in tso
    assert sc <= tso


def test_oracle_mp_separates_tso_from_pso():
    p = builtin("mp")
    assert (1, 0) not in oracle_outcomes(p, "tso")
    assert (1, 0) in oracle_outcomes(p, "pso")


def test_oracle_lb_separates_pso_from_rc():
    # load buffering needs a load to pass a program-later store
    p = builtin("lb")
    assert (1, 1) not in oracle_outcomes(p, "pso")
    assert (1, 1) in oracle_outcomes(p, "rc")


def test_oracle_nesting_holds_per_model():
    for name in ("dekker", "mp", "sb", "lb", "corr"):
        p = builtin(name)
        sc = oracle_outcomes(p, "sc")
        tso = oracle_outcomes(p, "tso")
        pso = oracle_outcomes(p, "pso")
        rc = oracle_outcomes(p, "rc")
        assert sc <= tso <= pso <= rc


def test_oracle_rejects_oversized_and_spinning_programs():
    big = parse_program("[core 0]\n" + "\n".join("Ld A -> r1" for _ in range(9)))
    with pytest.raises(ValueError):
        oracle_outcomes(big, "sc")
    with pytest.raises(ValueError):
        oracle_outcomes(builtin("spin"), "sc")


def test_oracle_single_core_is_deterministic():
    p = parse_program("[core 0]\nSt A 1\nLd A -> r1\nSt A 2\nLd A -> r2")
    for model in ("sc", "tso", "pso", "rc"):
        assert oracle_outcomes(p, model) == {(1, 2)}
