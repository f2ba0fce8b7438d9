"""Program DSL, builtin corpus, synthetic generator."""

import pytest

from tardisim.workloads import (BUILTIN_NAMES, LITMUS_NAMES, OpKind,
                                ParseError, SynthParams, builtin,
                                parse_program, synth)


def test_parse_symbolic_addresses_in_first_use_order():
    p = parse_program("""
    [core 0]
    St B 2          # B claims line 0
    Ld A -> r1

    [core 1]
    Ld B -> r2
    Fence
    """)
    assert p.n_cores == 2
    assert p.addr_names == {0: "B", 64: "A"}
    st = p.cores[0][0]
    assert st.kind is OpKind.STORE and st.addr == 0 and st.value == 2
    assert p.cores[0][1].reg == "r1"
    assert p.cores[1][1].kind is OpKind.FENCE


def test_parse_numeric_addresses_and_spin():
    p = parse_program("""
    [core 0]
    SpinUntil F == 3
    Sleep 12
    Acquire
    Release
    Ld 128
    """)
    ops = p.cores[0]
    assert ops[0].kind is OpKind.SPIN and ops[0].value == 3
    assert ops[1].n == 12
    assert ops[2].kind is OpKind.ACQUIRE and ops[3].kind is OpKind.RELEASE
    assert ops[4].addr == 128 and ops[4].reg is None


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_program("St A 1")               # op before a section
    with pytest.raises(ParseError):
        parse_program("[core 0]\nLd 100")     # unaligned address
    with pytest.raises(ParseError):
        parse_program("[core 0]\nFlush A")
    with pytest.raises(ParseError):
        parse_program("   \n# only comments\n")


def test_registers_in_first_use_order():
    p = builtin("dekker")
    assert p.registers() == [(0, "r1"), (1, "r2")]


def test_litmus_corpus_shape():
    assert len(LITMUS_NAMES) >= 12
    for name in LITMUS_NAMES:
        p = builtin(name)
        assert p.dynamic_ops() <= 8, name
        assert p.registers(), name


def test_builtin_names_all_resolve():
    for name in BUILTIN_NAMES:
        assert builtin(name).n_cores >= 1
    with pytest.raises(ParseError):
        builtin("nope")


def test_fig_programs_are_warm():
    fig1 = builtin("fig1")
    assert fig1.schedule == "sequential"
    assert {w.addr for w in fig1.warm} == set(fig1.addr_names)
    fig2 = builtin("fig2")
    by_name = {fig2.addr_names[w.addr]: w for w in fig2.warm}
    assert by_name["A"].rts == 5 and by_name["B"].rts == 10
    assert by_name["A"].in_l1 == (0, 1)


def test_spin_workload_params():
    p = builtin("spin", delay=77)
    assert p.cores[1][0].n == 77
    assert p.warm and p.warm[0].in_l1 == (0,)


def test_lease_case_iterations():
    p = builtin("lease_case", iterations=3)
    assert len(p.cores[0]) == 12 and len(p.cores[1]) == 12


def test_synth_is_deterministic():
    params = SynthParams(cores=4, ops_per_core=50, seed=9)
    assert synth(params) == synth(params)
    other = synth(SynthParams(cores=4, ops_per_core=50, seed=10))
    assert synth(params) != other


def test_synth_respects_shape():
    params = SynthParams(cores=3, ops_per_core=40, hot_lines=2,
                         shared_lines=4, private_lines=2, private_frac=0.5,
                         write_frac=0.5, seed=1)
    p = synth(params)
    assert p.n_cores == 3
    assert all(len(ops) == 40 for ops in p.cores)
    base = (params.hot_lines + params.shared_lines) * 64
    for cid, ops in enumerate(p.cores):
        for op in ops:
            if op.addr is not None and op.addr >= base:
                # private block: read-only and owned by this core
                lo = base + cid * params.private_lines * 64
                assert lo <= op.addr < lo + params.private_lines * 64
                assert op.kind is OpKind.LOAD
