import math

import pytest

from lazy_rearrange.model import (
    Action,
    Arrangement,
    BufferSlot,
    Disc,
    Gridded,
    Instance,
    InvalidPlanError,
    MalformedInstanceError,
    Plan,
    Pose,
    Prism,
    QueryOnBufferError,
    Table,
    is_goal_available,
    is_graspable,
    replay_plan,
    validate_arrangement,
)

from conftest import disc_instance


def plate_cup():
    objects = {"plate": Disc(0.1, 0.02), "cup": Disc(0.04, 0.1)}
    initial = Arrangement({"plate": Pose(-0.3, 0.0), "cup": Pose(0.3, 0.0)})
    goal = Arrangement({"plate": Pose(0.0, 0.2), "cup": Pose(0.0, 0.2, 0.02)}, {"cup": "plate"})
    return Instance(objects, initial, goal, Table(1.0, 1.0))


def test_pose_normalizes_theta_and_rejects_negative_z():
    assert Pose(0, 0, 0, -math.pi / 2).theta == pytest.approx(1.5 * math.pi)
    assert Pose(0, 0, 0, 2 * math.pi).theta == 0.0
    with pytest.raises(ValueError):
        Pose(0, 0, -0.1)


def test_prism_requires_convex_ccw():
    Prism(((0, 0), (1, 0), (0, 1)), 0.1)
    with pytest.raises(ValueError):
        Prism(((0, 0), (0, 1), (1, 0)), 0.1)


def test_gridded_area_and_radius():
    g = Gridded(((1, 1), (1, 1)), ((0, 0), (0, 0)), 0.1, 0.05)
    assert g.area == pytest.approx(0.04)
    assert g.bounding_radius == pytest.approx(math.hypot(0.1, 0.1))


def test_single_centered_disc_is_valid():
    inst = disc_instance([(0, 0)], [(0, 0)])
    assert validate_arrangement(inst.initial, inst).valid


def test_overlapping_discs_report_collision():
    inst = disc_instance([(0, 0), (0.05, 0)], [(0, 0), (0.3, 0)])
    rep = validate_arrangement(inst.initial, inst)
    assert not rep.valid
    assert any("collision" in v for v in rep.violations)


def test_disc_past_table_edge_is_out_of_region():
    inst = disc_instance([(0.48, 0)], [(0, 0)])
    rep = validate_arrangement(inst.initial, inst)
    assert not rep.valid and any("out-of-region" in v for v in rep.violations)


def test_stacked_goal_is_valid():
    inst = plate_cup()
    assert validate_arrangement(inst.goal, inst).valid


def test_graspability():
    inst = plate_cup()
    assert not is_graspable("plate", inst.goal)
    assert is_graspable("cup", inst.goal)
    side = disc_instance([(-0.2, 0), (0.2, 0)], [(0, 0.3), (0, -0.3)])
    assert is_graspable("o1", side.initial) and is_graspable("o2", side.initial)
    with pytest.raises(QueryOnBufferError):
        is_graspable("o1", side.initial.moved("o1", BufferSlot("b0")))


def test_goal_availability(swap_instance):
    assert not is_goal_available("o1", swap_instance.initial, swap_instance)
    free = disc_instance([(-0.3, 0)], [(0.3, 0)])
    assert is_goal_available("o1", free.initial, free)
    inst = plate_cup()
    assert not is_goal_available("cup", inst.initial, inst)
    moved = inst.initial.moved("plate", Pose(0.0, 0.2))
    assert is_goal_available("cup", moved, inst)


def test_instance_requires_matching_objects():
    with pytest.raises(MalformedInstanceError):
        Instance({"a": Disc(0.1, 0.1)}, Arrangement({}), Arrangement({"a": Pose(0, 0)}), Table(1, 1))


def test_action_must_move():
    with pytest.raises(ValueError):
        Action("a", Pose(0, 0), Pose(0, 0))


def test_replay_valid_and_invalid(swap_instance):
    a, b = Pose(-0.2, 0), Pose(0.2, 0)
    buf = Pose(0, 0.3)
    good = Plan((Action("o1", a, buf), Action("o2", b, a), Action("o1", buf, b)))
    assert len(replay_plan(swap_instance, good)) == 4
    with pytest.raises(InvalidPlanError) as err:
        replay_plan(swap_instance, Plan((Action("o1", a, b),)))
    assert err.value.step == 0
    with pytest.raises(InvalidPlanError):
        replay_plan(swap_instance, Plan((Action("o1", a, buf),)))  # does not reach the goal


def test_replay_rejects_non_graspable_pick():
    inst = plate_cup()
    stacked = Instance(
        inst.objects,
        inst.goal,
        Arrangement({"plate": Pose(-0.3, 0.0), "cup": Pose(0.3, 0.0)}),
        inst.table,
    )
    bad = Plan((Action("plate", Pose(0, 0.2), Pose(-0.3, 0)),))
    with pytest.raises(InvalidPlanError, match="not graspable"):
        replay_plan(stacked, bad)
