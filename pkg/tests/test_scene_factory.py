import numpy as np
import pytest

from placesynth.errors import InfeasibleSceneError, PreconditionError
from placesynth.eval_harness import eval_pp
from placesynth.geometry import Pose
from placesynth.scene_factory import (EPS_PEN, LabeledSample, ShapeLibrary, assemble, instantiate,
                                      make_receptacle, make_sample, max_penetration, read_corpus,
                                      refine_poses, write_corpus)
from placesynth.scene_graph import GraphNode, build_graph
from placesynth.scene_model import Scene, SceneObject, classify_relation, penetration_depth
from placesynth.shapes import shape_points

BOX_LIB = ShapeLibrary({"box": {"kind": "box", "size": [[0.1, 0.1], [0.1, 0.1], [0.1, 0.1]]}})


def box_obj(obj_id, size, xy):
    spec = {"kind": "box", "size": list(size)}
    pts = shape_points(spec)
    return SceneObject(obj_id, "box", pts, Pose([xy[0], xy[1], size[2] / 2], 0.0), spec)


def scene_of(objects, extent=(1.0, 1.0, 0.03)):
    return Scene(make_receptacle(0, extent), objects)


# --- instantiation -----------------------------------------------------------------------

def test_instantiate_empty_graph():
    scene = instantiate(build_graph([]), BOX_LIB)
    assert scene.objects == [] and scene.receptacle is not None


def test_instantiate_single_box_rests_on_support():
    g = build_graph([GraphNode(1, "box", [0.05, -0.02, 0.3])])
    scene = instantiate(g, BOX_LIB)
    obj = scene.objects[0]
    assert abs(obj.min_z - scene.support_height) <= 1e-3


def test_instantiate_keeps_horizontal_centroids():
    nodes = [GraphNode(1, "box", [0.0, 0.0, 0.05]), GraphNode(2, "box", [0.2, 0.1, 0.05]),
             GraphNode(3, "box", [-0.2, 0.15, 0.05])]
    scene = instantiate(build_graph(nodes), BOX_LIB, rng_seed=3)
    for n in nodes:
        obj = [o for o in scene.objects if o.id == n.id][0]
        assert np.allclose(obj.center[:2], n.centroid[:2], atol=1e-6)
    # receptacle covers every footprint with the margin
    rec = scene.receptacle.prism
    for o in scene.objects:
        assert all(rec.contains_xy(p) for p in o.prism.hull)


def test_instantiate_overflow():
    nodes = [GraphNode(1, "box", [0.0, 0.0, 0.0]), GraphNode(2, "box", [1.0, 0.0, 0.0])]
    with pytest.raises(InfeasibleSceneError):
        instantiate(build_graph(nodes), BOX_LIB, receptacle_extent=(0.5, 0.5, 0.03))


def test_instantiate_stacks_on_edges():
    nodes = [GraphNode(1, "box", [0.0, 0.0, 0.05]), GraphNode(2, "box", [0.0, 0.005, 0.15])]
    scene = instantiate(build_graph(nodes), BOX_LIB)
    low, high = sorted(scene.objects, key=lambda o: o.min_z)
    assert high.min_z == pytest.approx(low.max_z, abs=1e-9)
    assert penetration_depth(low.prism, high.prism) == 0.0


def test_library_sample_within_ranges(library, rng):
    for cat in library.categories:
        entry = library.entries[cat]
        spec = library.sample(cat, rng)
        if entry["kind"] == "box":
            for v, (lo, hi) in zip(spec["size"], entry["size"]):
                assert lo <= v <= hi
        elif entry["kind"] == "cylinder":
            assert entry["radius"][0] <= spec["radius"] <= entry["radius"][1]
    with pytest.raises(KeyError):
        library.sample("spaceship", rng)


# --- refinement --------------------------------------------------------------------------

def test_refine_noop_when_clear():
    scene = scene_of([box_obj(1, (0.1, 0.1, 0.1), (0, 0)), box_obj(2, (0.1, 0.1, 0.1), (0.3, 0))])
    out, removed = refine_poses(scene)
    assert out is scene and removed == []


def test_refine_resolves_small_overlap():
    a = box_obj(1, (0.1, 0.1, 0.1), (0.0, 0.0))
    b = box_obj(2, (0.1, 0.1, 0.1), (0.08, 0.0))
    out, removed = refine_poses(scene_of([a, b]))
    assert removed == []
    assert max_penetration(out) <= EPS_PEN
    moved = [o for o in out.objects if not np.array_equal(o.pose.translation, {1: a, 2: b}[o.id].pose.translation)]
    assert moved
    for o in moved:
        d = o.pose.translation - {1: a, 2: b}[o.id].pose.translation
        assert abs(d[0]) > 10 * abs(d[1])


def test_refine_removes_stuck_object():
    big = box_obj(1, (0.3, 0.3, 0.1), (0.0, 0.0))
    small = box_obj(2, (0.05, 0.05, 0.1), (0.0, 0.0))
    out, removed = refine_poses(scene_of([big, small]), steps=1, step_size=1e-4)
    assert removed and max_penetration(out) <= EPS_PEN


def test_refine_rejects_zero_steps():
    with pytest.raises(ValueError):
        refine_poses(scene_of([box_obj(1, (0.1, 0.1, 0.1), (0, 0))]), steps=0)


# --- samples and corpora ------------------------------------------------------------------

def test_make_sample_two_objects():
    a = box_obj(1, (0.1, 0.1, 0.1), (0.0, 0.0))
    b = box_obj(2, (0.1, 0.1, 0.1), (0.2, 0.0))
    s = make_sample(scene_of([a, b]), 1, rng_seed=0)
    assert len(s.scene.objects) == 1
    assert s.plans[0].anchor_id == s.scene.objects[0].id


def test_make_sample_too_few_objects():
    with pytest.raises(PreconditionError):
        make_sample(scene_of([box_obj(1, (0.1, 0.1, 0.1), (0, 0))]), 1)


def test_samples_are_consistent(small_bench):
    for s in small_bench:
        ok, pen = eval_pp(s.gt_pose, s)
        assert ok and pen <= EPS_PEN
        for p in s.plans:
            assert classify_relation(s.scene.object_by_id(p.anchor_id), s.dropped_object,
                                     s.scene.viewer_yaw) is p.direction
        assert len(s.gt_affordance) == len(s.scene.cloud().points)


def test_make_sample_deterministic(small_bench, tmp_path):
    s = small_bench[0]
    full = s.scene.replace(s.scene.objects + [s.dropped_object])
    one = make_sample(full, 1, rng_seed=42)
    two = make_sample(full, 1, rng_seed=42)
    one.save(tmp_path / "a")
    two.save(tmp_path / "b")
    for name in ("scene.json", "plans.json", "gt.json", "scene.ply", "object.ply"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_corpus_roundtrip(small_bench, tmp_path):
    write_corpus(small_bench, tmp_path / "c1", {"seed": 5})
    back = read_corpus(tmp_path / "c1")
    assert [b.name for b in back] == [s.name for s in small_bench]
    write_corpus(back, tmp_path / "c2", {"seed": 5})
    files = sorted(p.relative_to(tmp_path / "c1") for p in (tmp_path / "c1").rglob("*") if p.is_file())
    for f in files:
        assert (tmp_path / "c1" / f).read_bytes() == (tmp_path / "c2" / f).read_bytes(), f
    loaded = LabeledSample.load(tmp_path / "c1" / small_bench[0].name)
    assert loaded.gt_pose == small_bench[0].gt_pose


def test_assemble_receptacle_id_avoids_collision():
    g = build_graph([GraphNode(0, "box", [0, 0, 0]), GraphNode(1, "box", [0.3, 0, 0])])
    scene = assemble(g, {0: BOX_LIB.sample("box", np.random.default_rng(0)),
                         1: BOX_LIB.sample("box", np.random.default_rng(1))})
    assert scene.receptacle.id == 2
