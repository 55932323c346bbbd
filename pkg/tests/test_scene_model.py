import math

import numpy as np
import pytest

from placesynth.errors import AmbiguousRelationError, InfeasiblePlanSetError, SchemaError
from placesynth.geometry import Pose
from placesynth.scene_model import (COMPASS, Prism, Relation, Scene, SceneObject, StructuredPlan,
                                    annotate_region, classify_relation, gt_affordance, load_plans,
                                    load_scene, penetration_depth, prism_from_points, save_plans,
                                    save_scene)
from placesynth.shapes import box_surface, receptacle_points

from oracles import sweep_penetration


def box(obj_id, size, xy, yaw=0.0, base=0.0):
    pts = box_surface(size)
    pts = pts - (pts.min(axis=0) + pts.max(axis=0)) / 2
    return SceneObject(obj_id, f"box{obj_id}", pts, Pose([xy[0], xy[1], base + size[2] / 2], yaw))


def table(extent=(1.0, 1.0, 0.03)):
    pts = receptacle_points(extent, 0.02)
    return SceneObject(0, "table", pts, Pose([0, 0, -extent[2] / 2], 0.0))


# --- relations ----------------------------------------------------------------------

def test_relation_parse_roundtrip():
    assert len(Relation) == 9
    for r in Relation:
        assert Relation.parse(str(r)) is r
    assert Relation.parse("Left-Front") is Relation.LEFT_FRONT
    assert Relation.parse("right of") is Relation.RIGHT
    with pytest.raises(ValueError):
        Relation.parse("under")


@pytest.mark.parametrize("offset,expected", [
    ((0.2, 0.0), Relation.RIGHT),
    ((0.1, -0.1), Relation.RIGHT_FRONT),
    ((0.0, 0.3), Relation.BEHIND),
    ((-0.2, 0.01), Relation.LEFT),
    ((-0.1, -0.1), Relation.LEFT_FRONT),
])
def test_classify_compass(offset, expected):
    a = box(1, (0.05, 0.05, 0.05), (0, 0))
    b = box(2, (0.05, 0.05, 0.05), offset)
    assert classify_relation(a, b) is expected


def test_classify_on():
    a = box(1, (0.2, 0.2, 0.05), (0, 0))
    b = box(2, (0.05, 0.05, 0.05), (0.01, 0.0), base=0.05)
    assert classify_relation(a, b) is Relation.ON


def test_classify_ambiguous():
    a = box(1, (0.05, 0.05, 0.05), (0, 0))
    b = box(2, (0.05, 0.05, 0.05), (0.0005, 0.0))
    with pytest.raises(AmbiguousRelationError):
        classify_relation(a, b)


def test_classify_viewer_rotation_equivariance(rng):
    for _ in range(200):
        rot = rng.uniform(-math.pi, math.pi)
        xy_a, xy_b = rng.uniform(-0.5, 0.5, size=(2, 2))
        c, s = math.cos(rot), math.sin(rot)
        rmat = np.array([[c, -s], [s, c]])
        a, b = box(1, (0.05, 0.05, 0.05), xy_a), box(2, (0.05, 0.05, 0.05), xy_b)
        a2, b2 = box(1, (0.05, 0.05, 0.05), rmat @ xy_a), box(2, (0.05, 0.05, 0.05), rmat @ xy_b)
        d = xy_b - xy_a
        ang = math.degrees(math.atan2(d[1], d[0])) % 45.0
        if min(abs(ang - 22.5), 45 - abs(ang - 22.5)) < 1e-6:
            continue  # sector boundary, rounding decides
        assert classify_relation(a, b, 0.0) is classify_relation(a2, b2, rot)


# --- penetration -----------------------------------------------------------------------

def test_penetration_boxes():
    a = box(1, (0.1, 0.1, 0.1), (0, 0))
    b = box(2, (0.1, 0.1, 0.1), (0.08, 0))
    assert penetration_depth(a.prism, b.prism) == pytest.approx(0.02, abs=1e-12)
    c = box(3, (0.1, 0.1, 0.1), (0.1, 0))
    assert penetration_depth(a.prism, c.prism) == 0.0
    d = box(4, (0.1, 0.1, 0.1), (0, 0), base=0.1)
    assert penetration_depth(a.prism, d.prism) == 0.0


def test_penetration_nested():
    a = box(1, (0.2, 0.2, 0.5), (0, 0))
    b = box(2, (0.06, 0.06, 0.5), (0, 0))
    # centered and tall: separating needs the half-extent sum along x
    assert penetration_depth(a.prism, b.prism) == pytest.approx(0.13, abs=1e-12)


def test_penetration_matches_independent_sweep(rng):
    for _ in range(1000):
        a = box(1, rng.uniform(0.03, 0.15, 3), rng.uniform(-0.1, 0.1, 2), rng.uniform(-math.pi, math.pi))
        b = box(2, rng.uniform(0.03, 0.15, 3), rng.uniform(-0.1, 0.1, 2), rng.uniform(-math.pi, math.pi),
                base=rng.uniform(-0.05, 0.05))
        exact = penetration_depth(a.prism, b.prism)
        swept = sweep_penetration(a.world_points, b.world_points)
        # the sweep can only overshoot the edge-normal minimum, by at most the angular step
        assert swept >= exact - 1e-9
        assert swept - exact <= 0.3 * math.pi / 3600 + 1e-9


def test_prism_contains_boundary():
    p = prism_from_points(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 1], [0, 1, 1.0]]))
    assert p.contains_xy([1.0, 0.5]) and not p.contains_xy([1.01, 0.5])
    assert isinstance(p, Prism)


# --- ground truth affordance ----------------------------------------------------------

def test_gt_affordance_peak_and_tail():
    recep = table()
    scene = Scene(recep, [])
    pts = scene.cloud().points
    t = pts[len(pts) // 2]
    ext = np.array([0.1, 0.0, 0.05])  # footprint radius 0.05
    amap = gt_affordance(scene, Pose(t, 0.0), ext)
    assert amap.activations[len(pts) // 2] == 1.0
    d = np.linalg.norm(pts - t, axis=1)
    far = d >= 0.5
    assert np.all(amap.activations[far] < 1e-21)
    at_sigma = np.isclose(d, 0.05, atol=1e-12)
    assert np.allclose(amap.activations[at_sigma], math.exp(-0.5))
    order = np.argsort(d)
    assert np.all(np.diff(amap.activations[order]) <= 1e-15)


# --- annotated regions ------------------------------------------------------------------

def test_region_band_radii():
    anchor = SceneObject(1, "disc", np.array([[-0.05, 0, 0], [0.05, 0, 0], [0, 0, 0.05]]),
                         Pose([0, 0, 0.025], 0.0))
    scene = Scene(table(), [anchor])
    plan = StructuredPlan(1, "disc", (0, 0, 0), Relation.RIGHT)
    region = annotate_region(scene, [plan], [0.1, 0.0, 0.05])
    band = region.constraints[0]
    assert band.r_min == pytest.approx(0.10) and band.r_max == pytest.approx(0.25)
    assert region.contains([0.10, 0.0]) and region.contains([0.25, 0.0])
    assert not region.contains([0.26, 0.0]) and not region.contains([-0.15, 0.0])
    # boundary of the 90 degree sector is inclusive
    r = 0.2
    assert region.contains([r * math.cos(math.pi / 4), r * math.sin(math.pi / 4)])


def test_region_disjoint_plans():
    anchor = box(1, (0.1, 0.1, 0.05), (0, 0))
    scene = Scene(table(), [anchor])
    plans = [StructuredPlan(1, "a", (0, 0, 0), Relation.LEFT), StructuredPlan(1, "a", (0, 0, 0), Relation.RIGHT)]
    with pytest.raises(InfeasiblePlanSetError):
        annotate_region(scene, plans, [0.05, 0.05, 0.05])


def test_region_on_is_footprint():
    anchor = box(1, (0.2, 0.1, 0.05), (0.1, 0.1), yaw=0.3)
    scene = Scene(table(), [anchor])
    region = annotate_region(scene, [StructuredPlan(1, "a", (0, 0, 0), Relation.ON)], [0.05, 0.05, 0.05])
    assert region.polygon.equals(anchor.prism.polygon())


def test_region_center_classifies_back(rng):
    for _ in range(40):
        anchor = box(1, rng.uniform(0.04, 0.2, 3), rng.uniform(-0.2, 0.2, 2), rng.uniform(-math.pi, math.pi))
        scene = Scene(table(), [anchor])
        size = rng.uniform(0.04, 0.1, 3)
        for rel in COMPASS:
            plan = StructuredPlan.for_anchor(anchor, rel)
            center = annotate_region(scene, [plan], size).center
            subject = box(2, size, center)
            assert classify_relation(anchor, subject) is rel


# --- files ---------------------------------------------------------------------------

def test_scene_and_plan_files_roundtrip(tmp_path, demos):
    scene = demos[0]
    save_scene(scene, tmp_path / "scene.json")
    back = load_scene(tmp_path / "scene.json")
    assert np.array_equal(back.cloud().points, scene.cloud().points)
    save_scene(back, tmp_path / "again.json")
    assert (tmp_path / "scene.json").read_bytes() == (tmp_path / "again.json").read_bytes()
    plans = [StructuredPlan.for_anchor(scene.objects[0], Relation.LEFT_BEHIND)]
    save_plans(plans, tmp_path / "plans.json")
    assert load_plans(tmp_path / "plans.json") == plans


def test_scene_schema_version_required(tmp_path):
    (tmp_path / "s.json").write_text('{"objects": []}')
    with pytest.raises(SchemaError):
        load_scene(tmp_path / "s.json")


def test_demo_scenes_rest_on_support(demos):
    for scene in demos:
        top = scene.support_height
        for o in scene.objects:
            stacked = any(o.min_z >= other.max_z - 0.02 and other.contains_xy(o.center)
                          for other in scene.objects if other is not o)
            assert stacked or abs(o.min_z - top) <= 0.005
