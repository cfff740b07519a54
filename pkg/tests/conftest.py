import math

import pytest

from lazy_rearrange.model import Arrangement, Disc, Instance, Pose, Scenario, Table


def disc_instance(starts, goals, r=0.1, table=(1.0, 1.0), scenario="EE", C=10.0, height=0.05):
    ids = [f"o{k + 1}" for k in range(len(starts))]
    shape = Disc(r, height)
    return Instance(
        {o: shape for o in ids},
        Arrangement({o: Pose(*p) for o, p in zip(ids, starts)}),
        Arrangement({o: Pose(*p) for o, p in zip(ids, goals)}),
        Table(*table),
        Scenario(scenario),
        C,
        "fixture",
    )


@pytest.fixture
def swap_instance():
    """Two discs whose goals sit on each other's start: a buffer is unavoidable."""
    return disc_instance([(-0.2, 0.0), (0.2, 0.0)], [(0.2, 0.0), (-0.2, 0.0)])


@pytest.fixture
def free_instance():
    return disc_instance([(-0.3, -0.3), (0.3, -0.3)], [(-0.3, 0.3), (0.3, 0.3)])


def approx(x, tol=1e-9):
    return pytest.approx(x, abs=tol)


SQRT3 = math.sqrt(3.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
