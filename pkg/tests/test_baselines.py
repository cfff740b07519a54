import itertools
import math

import pytest

from lazy_rearrange.baselines import (
    BruteForceOracle,
    OracleTooLarge,
    brute_force_oracle,
    greedy_sampling_search,
    orla_action_search,
    orla_full_search,
)
from lazy_rearrange.harness import generate_disc_instance, verify_plan
from lazy_rearrange.search import SearchConfig

from conftest import disc_instance


def test_ablations_at_goal():
    inst = disc_instance([(0.1, 0)], [(0.1, 0)])
    for fn in (orla_action_search, greedy_sampling_search, orla_full_search):
        res = fn(inst)
        assert res.success and len(res.plan) == 0


def test_action_only_mutual_blocking(swap_instance):
    res = orla_action_search(swap_instance)
    assert len(res.plan) == 3
    assert res.cost.travel > 0  # true travel is still reported
    far = disc_instance([(-0.4, -0.4)], [(0.4, 0.4)])
    assert len(orla_action_search(far).plan) == 1


def test_greedy_sparse_matches_full(free_instance):
    assert len(greedy_sampling_search(free_instance).plan) == len(orla_full_search(free_instance).plan) == 2


def test_greedy_buffer_near_goal(swap_instance):
    res = greedy_sampling_search(swap_instance)
    assert len(res.plan) == 3
    buffered = res.plan.actions[0]
    goal = swap_instance.goal.pose(buffered.object)
    # the first ring with room is one diameter away from the occupied goal
    assert math.hypot(buffered.target.x - goal.x, buffered.target.y - goal.y) == pytest.approx(0.2, abs=0.011)


def test_greedy_buffer_can_block_later_moves():
    """A dense three-disc instance where the near-goal buffer obstructs later placements."""
    inst = generate_disc_instance(3, 0.35, "EE", 20)
    full, greedy = orla_full_search(inst), greedy_sampling_search(inst)
    assert len(full.plan) == 4 and len(greedy.plan) == 7
    for res in (full, greedy):
        assert verify_plan(inst, res.plan, res.cost).valid


def test_oracle_single_object():
    inst = disc_instance([(-0.3, -0.2)], [(0.3, 0.2)])
    o = brute_force_oracle(inst)
    assert o.actions == 1 and o.total == pytest.approx(10 + math.hypot(0.6, 0.4))


def test_oracle_two_free_objects_best_order(free_instance):
    o = brute_force_oracle(free_instance)
    a1, a2 = ((-0.3, -0.3), (-0.3, 0.3)), ((0.3, -0.3), (0.3, 0.3))
    orders = []
    for first, second in itertools.permutations([a1, a2]):
        orders.append(math.dist(*first) + math.dist(first[1], second[0]) + math.dist(*second))
    assert o.actions == 2 and o.cost.travel == pytest.approx(min(orders))


def test_oracle_mutual_blocking_enumeration(swap_instance):
    """Cross-check: enumerate 'buffer one object at any lattice pose' plans directly."""
    o = BruteForceOracle(swap_instance)
    res = o.solve()
    assert res.actions == 3
    best = math.inf
    A, B = (-0.2, 0.0), (0.2, 0.0)
    for first, start, goal, other_start in ((0, A, B, B), (1, B, A, A)):
        for k in o.allowed[first]:
            p = o.poses[k]
            xy = (p.x, p.y)
            if math.dist(xy, A) < 0.2 - 1e-9 or math.dist(xy, B) < 0.2 - 1e-9:
                continue
            # buffer, move the other object onto our start, return
            t = math.dist(start, xy) + math.dist(xy, other_start) + math.dist(other_start, start) + math.dist(start, xy) + math.dist(xy, goal)
            best = min(best, t)
    assert res.cost.travel == pytest.approx(best, abs=1e-9)
    assert res.total == pytest.approx(30 + best)


def test_oracle_limits():
    with pytest.raises(OracleTooLarge):
        BruteForceOracle(generate_disc_instance(4, 0.2, "EE", 0))
    with pytest.raises(OracleTooLarge):
        BruteForceOracle(generate_disc_instance(3, 0.2, "EE", 1), max_states=5).solve()


@pytest.mark.parametrize("seed", range(4))
def test_full_never_worse_than_action_on_total(seed):
    inst = generate_disc_instance(6, 0.2, "EE" if seed % 2 else "MB", seed)
    cfg = SearchConfig(timeout=60)
    full, act = orla_full_search(inst, cfg), orla_action_search(inst, cfg)
    if full.success and act.success:
        assert full.cost.total <= act.cost.total + 1e-9
        assert len(act.plan) <= len(greedy_sampling_search(inst, cfg).plan)
