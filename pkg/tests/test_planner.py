import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lazy_rearrange.harness import generate_disc_instance, verify_plan
from lazy_rearrange.model import Arrangement, Instance, MalformedInstanceError, Pose
from lazy_rearrange.planner import RearrangementPlanner, check_instance, check_instances


def test_estimator_params_and_clone():
    est = RearrangementPlanner(planner="orla-action", timeout=5.0)
    assert est.get_params()["planner"] == "orla-action"
    c = clone(est).set_params(seed=3)
    assert c.seed == 3 and est.seed == 0


def test_predict_and_score():
    insts = [generate_disc_instance(3, 0.2, "EE", s) for s in range(3)]
    est = RearrangementPlanner().fit()
    plans = est.predict(insts)
    assert all(verify_plan(i, p).valid for i, p in zip(insts, plans))
    assert est.score(insts) == 1.0
    assert len(est.results_) == 3
    assert est.config_dict()["planner"] == "orla-full"


def test_unfitted_and_bad_params():
    with pytest.raises(NotFittedError):
        RearrangementPlanner().predict([generate_disc_instance(2, 0.2, "EE", 0)])
    with pytest.raises(ValueError):
        RearrangementPlanner(planner="mcts").fit()
    with pytest.raises(ValueError):
        RearrangementPlanner(timeout=0).fit()


def test_input_validation(swap_instance):
    assert check_instances(swap_instance) == [swap_instance]
    with pytest.raises(TypeError):
        check_instance("not an instance")
    overlapping = Instance(
        swap_instance.objects,
        Arrangement({"o1": Pose(0, 0), "o2": Pose(0.05, 0)}),
        swap_instance.goal,
        swap_instance.table,
    )
    with pytest.raises(MalformedInstanceError):
        RearrangementPlanner().fit().plan(overlapping)
