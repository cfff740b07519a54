import numpy as np
import pytest
from shapely.geometry import MultiPoint, Point

from lazy_rearrange.geometry import synthesize_heightmap
from lazy_rearrange.model import Arrangement, Disc, Instance, Pose, Table
from lazy_rearrange.stability import (
    AlwaysStable,
    MalformedQueryError,
    StabilityQuery,
    SupportPolygonStability,
    build_query,
    make_oracle,
    support_polygon_assess,
)

from stability_fixtures import N, box_bottom, fixtures


@pytest.mark.parametrize("name,query,stable", fixtures(), ids=[f[0] for f in fixtures()])
def test_fixture_ground_truth(name, query, stable):
    v = support_polygon_assess(query)
    assert v.stable is stable
    assert 0.0 <= v.probability <= 1.0


def test_flat_contact_is_confident():
    q = StabilityQuery(np.zeros((N, N)), box_bottom())
    assert support_polygon_assess(q).probability > 0.99


def test_overhang_hull_membership_brute_force():
    """Cross-check the verdict with a hull built independently from contact cell centers."""
    name, q, _ = fixtures()[1]
    env, bot = q.environment, q.object_bottom
    lift = np.where(np.isnan(bot), -np.inf, env - np.nan_to_num(bot))
    ii, jj = np.nonzero(lift >= lift.max() - 0.002)
    c = (np.arange(N) + 0.5) * q.resolution - N * q.resolution / 2
    hull = MultiPoint(list(zip(c[jj], c[ii]))).convex_hull
    assert not hull.contains(Point(q.mass_center))
    assert not support_polygon_assess(q).stable


def test_always_stable():
    o = AlwaysStable()
    assert o.assess(None).probability == 1.0
    assert o.predict([StabilityQuery(np.zeros((N, N)), box_bottom())]).tolist() == [True]


def test_malformed_queries():
    with pytest.raises(MalformedQueryError):
        StabilityQuery(np.zeros((N, N)), np.zeros((10, 10))).validate()
    with pytest.raises(MalformedQueryError):
        StabilityQuery(np.zeros((10, 10)), np.zeros((10, 10))).validate()
    with pytest.raises(MalformedQueryError):
        support_polygon_assess(StabilityQuery(np.zeros((N, N)), np.full((N, N), np.nan)))


def test_determinism_and_predict_proba():
    o = SupportPolygonStability()
    qs = [f[1] for f in fixtures()]
    p1, p2 = o.predict_proba(qs), o.predict_proba(qs)
    assert np.array_equal(p1, p2)
    assert np.allclose(p1.sum(1), 1.0)


@pytest.mark.parametrize("shift", [(3, 0), (0, -5), (7, 4)])
def test_translation_equivariance(shift):
    o = SupportPolygonStability()
    for name, q, _ in fixtures():
        dy, dx = shift
        env = np.roll(q.environment, shift, axis=(0, 1))
        bot = np.roll(q.object_bottom, shift, axis=(0, 1))
        mc = (q.mass_center[0] + dx * q.resolution, q.mass_center[1] + dy * q.resolution)
        assert o.assess(StabilityQuery(env, bot, mc)).stable == o.assess(q).stable, name


def test_monotone_in_contact():
    """Raising cells under the footprint toward the landing height never destabilizes."""
    o = SupportPolygonStability()
    rng = np.random.default_rng(0)
    for name, q, _ in fixtures():
        if not o.assess(q).stable:
            continue
        _, landing, _ = o.contact_hull(q)
        foot = ~np.isnan(q.object_bottom)
        target = landing + np.nan_to_num(q.object_bottom)
        for _ in range(5):
            pick = foot & (rng.random(foot.shape) < 0.3)
            env = np.where(pick, np.maximum(q.environment, target), q.environment)
            assert o.assess(StabilityQuery(env, q.object_bottom, q.mass_center)).stable, name


def test_build_query_on_plate():
    objs = {"plate": Disc(0.1, 0.02), "cup": Disc(0.04, 0.1)}
    arr = Arrangement({"plate": Pose(0, 0)})
    inst = Instance(objs, Arrangement({"plate": Pose(0, 0), "cup": Pose(0.3, 0)}), Arrangement({"plate": Pose(0, 0), "cup": Pose(0.3, 0)}), Table(1, 1))
    q = build_query(objs["cup"], Pose(0, 0), arr, inst)
    assert q.environment.shape == (200, 200)
    assert make_oracle("support-polygon").assess(q).stable
    edge = build_query(objs["cup"], Pose(0.12, 0), arr, inst)
    assert not make_oracle("support-polygon").assess(edge).stable
    with pytest.raises(ValueError):
        make_oracle("learned")
