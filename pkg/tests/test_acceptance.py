"""Acceptance gate: one test per shipping criterion.

Each test prints a single ``criterion NN: PASS/FAIL`` line and enforces
its wall-clock budget, so ``pytest tests/test_acceptance.py -rA`` reads
as a checklist.
"""

import random
import time
from contextlib import contextmanager
from pathlib import Path

from tardisim.audit import CoherenceAuditor
from tardisim.checker import check_trace, oracle_outcomes
from tardisim.config import preset
from tardisim.engine import Simulator, enumerate_outcomes
from tardisim.workloads import (LITMUS_NAMES, OpKind, SynthParams, builtin,
                                synth)

MODELS = ("sc", "tso", "pso", "rc")


@contextmanager
def gate(num: int, budget_s: float | None = None):
    t0 = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"criterion {num:02d}: FAIL")
        raise
    dt = time.monotonic() - t0
    if budget_s is not None and dt >= budget_s:
        print(f"criterion {num:02d}: FAIL (took {dt:.1f}s, budget {budget_s:g}s)")
        raise AssertionError(f"criterion {num} exceeded its {budget_s:g}s budget")
    print(f"criterion {num:02d}: PASS ({dt:.2f}s)")


def test_criterion_01_fig1_exact_timestamps():
    with gate(1, 1.0):
        cfg = preset("tardis-base", model="sc", static_lease=10,
                     store_buffer=0, seed=0)
        sim = Simulator(cfg, builtin("fig1"))
        rep = sim.run()
        rows = {(r.core, r.idx): r for r in sim.trace}
        st_a, ld_b = rows[(0, 0)], rows[(0, 1)]
        st_b, ld_a = rows[(1, 0)], rows[(1, 1)]
        assert st_a.ts == 1                  # store A writes at ts 1
        a_l1 = sim.cores[0].l1.lookup(st_a.addr, touch=False)
        assert a_l1.wts == 1                 # its snapshot stays wts 1
        assert ld_b.ts == 1
        llc_b = sim.llc.lines.lookup(ld_b.addr, touch=False)
        assert llc_b.rts == 11               # load B leased it through 11
        assert st_b.ts == 12                 # store B must clear that lease
        assert ld_a.ts == 12
        llc_a = sim.llc.lines.lookup(st_a.addr, touch=False)
        assert llc_a.rts == 22               # load A leased it through 22
        assert rep.outcome == {"c0.r1": 0, "c1.r2": 1}


def test_criterion_02_fig2_store_buffer_timestamps():
    with gate(2, 1.0):
        cfg = preset("tardis-base", model="tso", static_lease=10, seed=0)
        sim = Simulator(cfg, builtin("fig2"))
        rep = sim.run()
        ts = {(r.core, r.idx): r.ts for r in sim.trace}
        assert (ts[(0, 0)], ts[(0, 1)], ts[(0, 2)]) == (11, 0, 0)
        assert (ts[(1, 0)], ts[(1, 1)], ts[(1, 2)]) == (6, 6, 6)
        assert rep.outcome == {"c0.r1": 1, "c0.r2": 0, "c1.r3": 0}


def test_criterion_03_litmus_outcomes_admitted_and_nested():
    with gate(3, 300.0):
        programs = [builtin(n) for n in LITMUS_NAMES if n != "iriw_fence"]
        programs.append(builtin("lease_case", iterations=1))
        assert len(programs) >= 12
        for p in programs:
            seen = {}
            allowed = {}
            for model in MODELS:
                seen[model] = enumerate_outcomes(p, model)
                allowed[model] = oracle_outcomes(p, model)
                assert seen[model] <= allowed[model], \
                    f"{p.name}/{model}: protocol outcomes escape the oracle"
            for weak, strong in zip(MODELS, MODELS[1:]):
                assert seen[weak] <= seen[strong], \
                    f"{p.name}: {weak} outcomes not within {strong}"
                assert allowed[weak] <= allowed[strong], \
                    f"{p.name}: {weak} oracle not within {strong}"


def test_criterion_04_model_separating_outcomes():
    with gate(4):
        dekker = builtin("dekker")
        assert (0, 0) in enumerate_outcomes(dekker, "tso")
        assert (0, 0) not in enumerate_outcomes(dekker, "sc")
        assert (0, 0) not in oracle_outcomes(dekker, "sc")
        listing2 = builtin("listing2")
        assert (1, 0, 0) in enumerate_outcomes(listing2, "tso")
        assert (1, 0, 0) not in enumerate_outcomes(listing2, "sc")
        assert (1, 0, 0) not in oracle_outcomes(listing2, "sc")


def test_criterion_05_randomized_runs_audited_clean():
    with gate(5, 600.0):
        runs = 0
        for i in range(1000):
            rng = random.Random(i)
            cores = rng.choice((2, 4, 8, 16))
            params = SynthParams(
                cores=cores,
                ops_per_core=rng.choice((15, 25, 40)),
                hot_lines=rng.choice((2, 4)),
                shared_lines=rng.choice((8, 16)),
                private_lines=rng.choice((2, 4)),
                write_frac=rng.choice((0.15, 0.3, 0.5)),
                fence_frac=rng.choice((0.0, 0.05)),
                seed=i)
            total_lines = (params.hot_lines + params.shared_lines
                           + cores * params.private_lines)
            assert cores <= 16 and total_lines <= 256
            predictor = bool(i & 2)
            cfg = preset("tardis-base",
                         model=MODELS[i % 4],
                         mesi=bool(i & 1),
                         lease_predictor=predictor,
                         static_lease=rng.choice((8, 16) if predictor
                                                 else (4, 8, 16)),
                         seed=i)
            aud = CoherenceAuditor()
            sim = Simulator(cfg, synth(params), auditor=aud)
            sim.run()                        # AuditError would fail the gate
            assert aud.checked_ticks > 0
            assert check_trace(sim.trace, cfg.model) == []
            runs += 1
        assert runs >= 1000


def test_criterion_06_livelock_detector_bounds_staleness():
    with gate(6, 30.0):
        for seed in range(8):
            cfg = preset("tardis-live", seed=seed)
            assert (cfg.ahb_entries, cfg.thresh_min, cfg.thresh_max,
                    cfg.check_thresh) == (8, 100, 800, 10)
            sim = Simulator(cfg, builtin("spin"))
            rep = sim.run()
            assert rep.outcome == {"c0.r1": 1}
            store = next(r for r in sim.trace if r.kind is OpKind.STORE)
            spins = sorted((r for r in sim.trace if r.kind is OpKind.SPIN),
                           key=lambda r: r.step)
            after = [r for r in spins if r.step >= store.step]
            done = next(i for i, r in enumerate(after)
                        if r.value.literal == 1)
            roundtrip = cfg.dram_latency
            assert done + 1 <= 2 * cfg.thresh_max + roundtrip, \
                f"seed {seed}: stale for {done + 1} loads after the store"
        # without the detector, plain self-increment still terminates
        cfg = preset("tardis-base", self_increment_period=100, seed=0)
        rep = Simulator(cfg, builtin("spin")).run()
        assert rep.outcome == {"c0.r1": 1}


def _renewals_of_a(cfg, iterations=128, lo=20, hi=120):
    sim = Simulator(cfg, builtin("lease_case", iterations=iterations),
                    record_renewals=True)
    sim.run()
    return sum(1 for cid, addr, idx, ok in sim.counters.renew_events
               if ok and addr == 0 and lo <= idx // 4 <= hi)


def test_criterion_07_lease_predictor_quells_renewals():
    with gate(7, 30.0):
        for seed in (0, 1, 2):
            static = _renewals_of_a(preset("tardis-base", seed=seed))
            predicted = _renewals_of_a(
                preset("tardis-base", lease_predictor=True, seed=seed))
            assert static > 0
            assert predicted <= 0.25 * static, \
                f"seed {seed}: {predicted} vs static {static}"


def test_criterion_08_traffic_class_directions():
    with gate(8, 300.0):
        params = SynthParams(cores=8, ops_per_core=40, write_frac=0.35,
                             seed=11)
        prog = synth(params)

        def rates(**over):
            reqs = accesses = 0
            for seed in (0, 1, 2):
                sim = Simulator(preset("tardis-base", seed=seed, **over), prog)
                rep = sim.run()
                assert rep.traffic["invalidation"]["messages"] == 0
                reqs += rep.renew_requests
                accesses += rep.llc_accesses
            return reqs / accesses

        mesi_tso = rates(model="tso", mesi=True)
        msi_tso = rates(model="tso", mesi=False)
        mesi_sc = rates(model="sc", mesi=True)
        assert mesi_tso < msi_tso        # E saves upgrade renewals
        assert mesi_tso <= mesi_sc       # relaxed clocks renew less

        for seed in (0, 1, 2):
            sim = Simulator(preset("directory", seed=seed), prog)
            rep = sim.run()
            assert rep.traffic["renew"]["messages"] == 0
            assert rep.checks_sent == 0


def test_criterion_09_self_increment_period_tradeoff():
    with gate(9, 120.0):
        periods = (100, 1000, 10000)
        spin = lambda: builtin("spin", delay=25000)
        off = [Simulator(preset("tardis-base", self_increment_period=p,
                                seed=0), spin()).run().steps
               for p in periods]
        assert off[0] < off[1] < off[2], f"no staleness growth: {off}"
        on = [Simulator(preset("tardis-live", self_increment_period=p,
                               seed=0), spin()).run().steps
              for p in periods]
        spread = (max(on) - min(on)) / min(on)
        assert spread < 0.10, f"detector-on spread {spread:.2%}: {on}"


def test_criterion_10_readme_states_desk_scale_scope():
    with gate(10):
        text = (Path(__file__).resolve().parent.parent / "README.md") \
            .read_text().lower()
        assert "desk-scale" in text
        assert "64" in text and "256" in text
        assert "out of scope" in text
