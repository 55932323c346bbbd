import numpy as np
import pytest

from placesynth.affordance import (AffordanceMap, compose_coarse, compose_fine, high_affordance_points,
                                   plan_affordance, plan_target, weighted_kmeans)
from placesynth.errors import PlaceSynthError
from placesynth.scene_model import Relation, StructuredPlan, annotate_region, top_surface_mask


def random_maps(rng, n_points, count=3):
    return [AffordanceMap(rng.random(n_points)) for _ in range(count)]


def test_map_range_validated():
    with pytest.raises(ValueError):
        AffordanceMap(np.array([0.2, 1.2]))
    with pytest.raises(ValueError):
        AffordanceMap(np.array([-0.1]))


def test_map_file_roundtrip(tmp_path, rng):
    m = AffordanceMap(rng.random(40), "abc")
    m.save(tmp_path / "map", {"sigma": 0.05})
    back = AffordanceMap.load(tmp_path / "map")
    assert back.reference == "abc"
    assert np.array_equal(back.activations, m.activations.astype(np.float32))


def test_compose_fine_identities(rng):
    for _ in range(200):
        maps = random_maps(rng, 50)
        single = compose_fine(maps[:1])
        assert np.array_equal(single.activations, maps[0].activations)
        fine = compose_fine(maps).activations
        for m in maps:
            assert np.all(fine >= m.activations)
        assert np.array_equal(fine, np.max([m.activations for m in maps], axis=0))


def test_compose_fine_empty():
    with pytest.raises(ValueError):
        compose_fine([])


def test_weighted_kmeans_separates_blobs(rng):
    a = rng.normal([0, 0, 0], 0.01, size=(100, 3))
    b = rng.normal([1, 0, 0], 0.01, size=(100, 3))
    pts = np.vstack([a, b])
    centers, labels = weighted_kmeans(pts, np.ones(200), 2, seed=0)
    centers = centers[np.argsort(centers[:, 0])]
    assert np.allclose(centers[0], a.mean(axis=0), atol=1e-12)
    assert np.allclose(centers[1], b.mean(axis=0), atol=1e-12)
    assert len(set(labels[:100])) == 1 and len(set(labels[100:])) == 1


def test_weighted_kmeans_deterministic(rng):
    pts = rng.random((300, 3))
    w = rng.random(300)
    c1, l1 = weighted_kmeans(pts, w, 3, seed=4)
    c2, l2 = weighted_kmeans(pts, w, 3, seed=4)
    assert np.array_equal(c1, c2) and np.array_equal(l1, l2)


def test_weighted_kmeans_weights_pull_center(rng):
    pts = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    centers, _ = weighted_kmeans(pts, np.array([3.0, 1.0]), 1)
    assert np.allclose(centers[0], [0.25, 0, 0])


def test_compose_coarse_peaks_at_centers(rng):
    pts = np.vstack([rng.normal([0, 0, 0], 0.02, (200, 3)), rng.normal([0.5, 0, 0], 0.02, (200, 3))])
    act = np.concatenate([np.full(200, 0.9), np.full(200, 0.2)])
    coarse, centers = compose_coarse([AffordanceMap(act)], pts, k=2, top_k=1, return_centers=True)
    assert len(centers) == 1
    assert np.linalg.norm(centers[0] - pts[:200].mean(axis=0)) < 1e-9
    assert coarse.activations[:200].mean() > 0.5 > coarse.activations[200:].max()


def test_compose_coarse_all_zero():
    with pytest.raises(PlaceSynthError):
        compose_coarse([AffordanceMap(np.zeros(5))], np.zeros((5, 3)))


def test_plan_affordance_peaks_in_region(small_bench):
    for s in small_bench:
        plan = s.plans[0]
        amap = plan_affordance(s.scene, plan, s.subject_extent)
        pts = s.scene.cloud().points
        assert len(amap) == len(pts)
        peak = pts[int(np.argmax(amap.activations))]
        if plan.direction is Relation.ON:
            anchor = s.scene.object_by_id(plan.anchor_id)
            assert top_surface_mask(s.scene, anchor)[int(np.argmax(amap.activations))]
        else:
            target = plan_target(s.scene, plan, s.subject_extent)
            assert np.linalg.norm(peak[:2] - target[:2]) < 0.02
            assert annotate_region(s.scene, [plan], s.subject_extent).contains(target)


def test_high_affordance_threshold(rng):
    act = np.array([0.1, 0.5, 1.0, 0.49])
    pts = rng.random((4, 3))
    hi = high_affordance_points(AffordanceMap(act), pts, 0.5)
    assert np.array_equal(hi.points, pts[[1, 2]])
    with pytest.raises(PlaceSynthError):
        high_affordance_points(AffordanceMap(np.zeros(4)), pts)
