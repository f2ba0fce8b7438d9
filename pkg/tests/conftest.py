import pytest

from tardisim.config import preset
from tardisim.engine import Simulator
from tardisim.workloads import builtin


def run(program, preset_name="tardis-base", auditor=None, **overrides):
    """Build, run, and hand back the simulator plus its report."""
    cfg = preset(preset_name, **overrides)
    sim = Simulator(cfg, program, auditor=auditor)
    report = sim.run()
    return sim, report


@pytest.fixture
def fig1():
    return builtin("fig1")


@pytest.fixture
def fig2():
    return builtin("fig2")
