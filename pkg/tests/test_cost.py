import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lazy_rearrange.cost import CostBreakdown, leg_distance, plan_cost, segment_cost
from lazy_rearrange.model import Action, InvalidPlanError, Plan, Pose, Scenario

from conftest import disc_instance


def test_leg_distance_examples():
    inst = disc_instance([(0, 0)], [(0.3, 0)], table=(3.0, 1.0))
    assert leg_distance("EE", Pose(0, 0), Pose(1, 0), inst) == 1.0
    # (0,-0.5) projects to s=1.5 and (1.0,-0.5) to s=2.5
    assert leg_distance(Scenario.MB, Pose(0, -0.4), Pose(1.0, -0.3), inst) == pytest.approx(1.0)
    for sc in ("EE", "MB"):
        assert leg_distance(sc, Pose(0.2, 0.1), Pose(0.2, 0.1), inst) == 0.0


def test_plan_cost_examples():
    inst = disc_instance([(0, 0)], [(1, 0)], table=(3, 3))
    assert plan_cost(Plan(()), inst, check=False) == CostBreakdown(0.0, 0.0)
    one = plan_cost(Plan((Action("o1", Pose(0, 0), Pose(1, 0)),)), inst)
    assert (one.travel, one.manipulation, one.total) == (1.0, 10.0, 11.0)
    two = [Action("o1", Pose(0, 0), Pose(1, 0)), Action("o2", Pose(1, 1), Pose(0, 1))]
    # legs: transfer 1, transit (1,0)->(1,1) = 1, transfer 1
    assert segment_cost(None, two, inst) == pytest.approx(3.0 + 20.0)


def test_plan_cost_rejects_invalid(swap_instance):
    with pytest.raises(InvalidPlanError):
        plan_cost(Plan((Action("o1", Pose(-0.2, 0), Pose(0.2, 0)),)), swap_instance)


def test_segment_with_buffer_on_the_way():
    inst = disc_instance([(0, 0)], [(1, 0)], table=(3, 3))
    direct = [Action("o1", Pose(0, 0), Pose(1, 0))]
    via = [Action("o1", Pose(0, 0), Pose(0.4, 0)), Action("o1", Pose(0.4, 0), Pose(1, 0))]
    assert segment_cost(None, via, inst) - segment_cost(None, direct, inst) == pytest.approx(10.0)
    assert segment_cost(None, [], inst) == 0.0


def _unique_edge(p, w=3.0, d=1.0):
    gaps = sorted([p.y + d / 2, w / 2 - p.x, d / 2 - p.y, p.x + w / 2])
    return gaps[1] - gaps[0] > 1e-9


xy = st.tuples(st.floats(-1.4, 1.4), st.floats(-0.4, 0.4))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(xy, xy), min_size=1, max_size=6), st.sampled_from(["EE", "MB"]))
def test_cost_properties(legs, scenario):
    inst = disc_instance([(0, 0)], [(0, 0)], table=(3.0, 1.0), scenario=scenario)
    acts = [Action("o1", Pose(*a), Pose(*b)) for a, b in legs if np.hypot(a[0] - b[0], a[1] - b[1]) > 1e-6]
    if not acts:
        return
    c = segment_cost(None, acts, inst)
    assert c >= inst.C * len(acts) - 1e-12
    assert segment_cost(None, acts[:-1], inst) <= c + 1e-12
    if scenario == "MB" and all(_unique_edge(p) for a in acts for p in (a.start, a.target)):
        # reflection maps the track onto itself, except where the nearest-edge tie-break picks a side
        for sx, sy in ((-1, 1), (1, -1)):
            mirrored = [Action("o1", Pose(sx * a.start.x, sy * a.start.y), Pose(sx * a.target.x, sy * a.target.y)) for a in acts]
            assert segment_cost(None, mirrored, inst) == pytest.approx(c, abs=1e-9)
