"""Turn scene graphs into concrete tabletop scenes and labeled placement samples."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import shapes
from .affordance import AffordanceMap
from .errors import AmbiguousRelationError, InfeasibleSceneError, PreconditionError, SchemaError
from .geometry import (CameraIntrinsics, Pose, build_tsdf, write_ply)
from .scene_graph import GraphNode, SceneGraph, build_graph
from .scene_model import (Camera, Relation, Scene, SceneObject, StructuredPlan, classify_relation,
                          convex_hull_2d, gt_affordance, load_plans, load_scene, penetration_depth, plan_region,
                          save_plans, save_scene, top_surface_mask)

EPS_PEN = 0.005
DEFAULT_STEP = 0.01
DEFAULT_REG = 10.0
RECEPTACLE_MARGIN = 0.02
STACK_GAP = 0.02
RECEPTACLE_THICKNESS = 0.03
DEFAULT_RECEPTACLE = (0.6, 0.4, RECEPTACLE_THICKNESS)
LIBRARY_SCHEMA_VERSION = 1
SAMPLE_SCHEMA_VERSION = 1

DEFAULT_INTRINSICS = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)


# --- shape library ------------------------------------------------------------

def _draw(rng: np.random.Generator, bounds) -> float:
    lo, hi = (float(v) for v in bounds)
    return float(np.clip(round(rng.uniform(lo, hi), 3), lo, hi))


def _sample_part(entry: dict, rng: np.random.Generator) -> dict:
    kind = entry["kind"]
    if kind == "box":
        return {"kind": "box", "size": [_draw(rng, r) for r in entry["size"]]}
    if kind == "cylinder":
        return {"kind": "cylinder", "radius": _draw(rng, entry["radius"]), "height": _draw(rng, entry["height"])}
    if kind == "composite":
        # parts stack bottom-up along the upright axis, centered horizontally
        parts, z = [], 0.0
        for sub in entry["parts"]:
            p = _sample_part(sub, rng)
            p["offset"] = [0.0, 0.0, round(z, 6)]
            z += p["size"][2] if p["kind"] == "box" else p["height"]
            parts.append(p)
        return {"kind": "composite", "parts": parts}
    raise SchemaError(f"unknown library kind {kind!r}")


@dataclass(eq=False)
class ShapeLibrary:
    """Per-category procedural generators with dimension ranges in meters."""

    entries: dict

    @property
    def categories(self) -> list:
        return sorted(self.entries)

    def sample(self, category: str, rng: np.random.Generator) -> dict:
        if category not in self.entries:
            raise KeyError(f"category {category!r} is not in the shape library")
        spec = _sample_part(self.entries[category], rng)
        spec["upright"] = self.entries[category].get("upright", "z")
        return spec

    def to_dict(self) -> dict:
        return {"schema_version": LIBRARY_SCHEMA_VERSION, "categories": self.entries}

    @classmethod
    def from_dict(cls, data: dict) -> "ShapeLibrary":
        if data.get("schema_version") != LIBRARY_SCHEMA_VERSION:
            raise SchemaError("unsupported shape library schema_version")
        return cls(dict(data["categories"]))

    @classmethod
    def load(cls, path) -> "ShapeLibrary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- instantiation -------------------------------------------------------------

def sample_shapes(graph: SceneGraph, library: ShapeLibrary, rng_seed) -> dict:
    """One concrete shape spec per node, drawn in node-id order."""
    rng = np.random.default_rng(rng_seed)
    return {n.id: library.sample(n.category, rng) for n in graph.nodes}


def _bfs_edges(graph: SceneGraph) -> list:
    out, frontier = [], [graph.root] if graph.root is not None else []
    by_parent = {}
    for e in graph.edges:
        by_parent.setdefault(e.parent, []).append(e)
    while frontier:
        nxt = []
        for pid in frontier:
            for e in sorted(by_parent.get(pid, []), key=lambda e: e.child):
                out.append(e)
                nxt.append(e.child)
        frontier = nxt
    return out


def make_receptacle(obj_id: int, extent, center_xy=(0.0, 0.0)) -> SceneObject:
    spec = {"kind": "slab", "size": [float(v) for v in extent]}
    pose = Pose(np.array([center_xy[0], center_xy[1], -float(extent[2]) / 2]), 0.0)
    return SceneObject(obj_id, "table", shapes.shape_points(spec), pose, spec)


def _camera_for(viewer_yaw: float) -> Optional[Camera]:
    if viewer_yaw == 0.0:
        return None
    return Camera(DEFAULT_INTRINSICS, Pose(np.zeros(3), viewer_yaw))


def assemble(graph: SceneGraph, specs: dict, receptacle_extent=None,
             margin: float = RECEPTACLE_MARGIN) -> Scene:
    """Place each node's shape at its centroid, resting on the support plane.

    Children of ``on`` edges rest on their parent's top instead. The receptacle
    is centered under the objects; with no explicit extent it is sized to the
    footprints plus ``margin`` on every side.
    """
    ids = graph.ids
    rec_id = 0 if 0 not in ids else max(ids) + 1
    points = {i: shapes.shape_points(specs[i]) for i in ids}
    base_z = {i: 0.0 for i in ids}
    height = {i: float(points[i][:, 2].max() - points[i][:, 2].min()) for i in ids}
    stacks = []
    for e in _bfs_edges(graph):
        if e.relation is Relation.ON:
            # the higher centroid rests on the lower one, whichever way the edge points
            up = graph.node(e.child).centroid[2] >= graph.node(e.parent).centroid[2]
            stacks.append((e.parent, e.child) if up else (e.child, e.parent))
    for _ in stacks:
        for low, high in stacks:
            base_z[high] = base_z[low] + height[low]
    objects = []
    for n in graph.nodes:
        pts = points[n.id]
        t = np.array([n.centroid[0], n.centroid[1], base_z[n.id] - pts[:, 2].min()])
        objects.append(SceneObject(n.id, n.category, pts, Pose(t, 0.0), specs[n.id]))

    if objects:
        hulls = np.concatenate([o.prism.hull for o in objects])
        lo, hi = hulls.min(axis=0), hulls.max(axis=0)
    else:
        lo = hi = np.zeros(2)
    center = (lo + hi) / 2
    need = hi - lo + 2 * margin
    if receptacle_extent is None:
        extent = (float(max(need[0], DEFAULT_RECEPTACLE[0] if not objects else 0.0)),
                  float(max(need[1], DEFAULT_RECEPTACLE[1] if not objects else 0.0)), RECEPTACLE_THICKNESS)
    else:
        extent = tuple(float(v) for v in receptacle_extent)
        if need[0] > extent[0] + 1e-9 or need[1] > extent[1] + 1e-9:
            raise InfeasibleSceneError("object footprints do not fit on the receptacle")
    receptacle = make_receptacle(rec_id, extent, center)
    return Scene(receptacle, objects, _camera_for(graph.viewer_yaw))


def instantiate(graph: SceneGraph, library: ShapeLibrary, receptacle_extent=None, rng_seed=0) -> Scene:
    return assemble(graph, sample_shapes(graph, library, rng_seed), receptacle_extent)


def layout_graph(graph: SceneGraph, specs: dict, margin_range, rng: np.random.Generator,
                 tries: int = 12) -> SceneGraph:
    """Re-space a graph so neighboring footprints are separated by a sampled margin.

    Each non-stacking edge keeps its direction sector; the child is pushed out
    to touch the parent's footprint plus a margin drawn from ``margin_range``.
    Several angles inside the sector are tried to avoid other placed objects.
    """
    if graph.root is None:
        return graph
    hulls = {i: convex_hull_2d(shapes.shape_points(specs[i])[:, :2]) for i in graph.ids}
    pos = {graph.root: graph.node(graph.root).centroid[:2].copy()}
    placed = [graph.root]
    stacked_on = {}
    for e in _bfs_edges(graph):
        if e.relation is Relation.ON:
            pos[e.child] = pos[e.parent].copy()
            stacked_on[e.child] = e.parent
            continue
        base = math.atan2(e.offset[1], e.offset[0])
        lo_m, hi_m = margin_range
        gap = rng.uniform(lo_m, hi_m)
        best, best_clear = None, -np.inf
        for k in range(tries):
            # zig-zag around the original heading, staying within +-20 degrees
            shift = math.radians(20.0) * (((k + 1) // 2) / (tries // 2)) * (1 if k % 2 else -1)
            ang = base + (shift if k else 0.0)
            u = np.array([math.cos(ang), math.sin(ang)])
            dist = np.max(hulls[e.parent] @ u) + np.max(-(hulls[e.child] @ u)) + gap
            cand = pos[e.parent] + dist * u
            clear = min((_hull_gap(hulls[e.child] + cand, hulls[o] + pos[o])
                         for o in placed if o not in stacked_on), default=np.inf)
            if clear >= lo_m - 1e-9:
                best = cand
                break
            if clear > best_clear:
                best, best_clear = cand, clear
        pos[e.child] = best
        placed.append(e.child)
    nodes = [GraphNode(n.id, n.category, np.array([pos[n.id][0], pos[n.id][1], n.centroid[2]]))
             for n in graph.nodes]
    return build_graph(nodes, graph.viewer_yaw, graph.root, receptacle_extent=None, source=graph.source)


def _hull_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Separation of two convex polygons along their edge normals (negative when overlapping)."""
    axes = []
    for h in (a, b):
        e = np.roll(h, -1, axis=0) - h
        n = np.column_stack([e[:, 1], -e[:, 0]])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        axes.append(n)
    ax = np.vstack(axes)
    pa, pb = a @ ax.T, b @ ax.T
    return float(np.max(np.maximum(pb.min(axis=0) - pa.max(axis=0), pa.min(axis=0) - pb.max(axis=0))))


# --- collision and refinement --------------------------------------------------------

def pairwise_penetration(objects: Sequence[SceneObject]) -> np.ndarray:
    """Symmetric matrix of prism penetration depths (receptacle excluded by the caller)."""
    n = len(objects)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = penetration_depth(objects[i].prism, objects[j].prism)
    return out


def max_penetration(scene: Scene) -> float:
    m = pairwise_penetration(scene.objects)
    return float(m.max()) if m.size else 0.0


def _pen_against(obj_prism, others) -> float:
    return max((penetration_depth(obj_prism, o.prism) for o in others), default=0.0)


def _rests_on(upper: SceneObject, lower: SceneObject) -> bool:
    return (upper.id != lower.id and lower.contains_xy(upper.center)
            and abs(upper.min_z - lower.max_z) < STACK_GAP)


def _riders(obj: SceneObject, objs: list) -> list:
    """Objects stacked on ``obj``, directly or through other stacked objects."""
    out, frontier = [], [obj]
    while frontier:
        nxt = [o for o in objs if o not in out and o is not obj and any(_rests_on(o, f) for f in frontier)]
        out += nxt
        frontier = nxt
    return out


def _shift(objs: list, delta: np.ndarray) -> list:
    return [o.moved(Pose(o.pose.translation + delta, o.pose.yaw)) for o in objs]


def _group_pen(group: list, others: list) -> float:
    return max(_pen_against(o.prism, others) for o in group)


def _refine_one(obj: SceneObject, riders: list, others: list, receptacle: SceneObject, steps: int,
                step_size: float, reg_weight: float, eps_pen: float, voxel_size: float, truncation: float):
    """Gradient ascent of the TSDF of ``others`` for one object; riders move along."""
    t0 = obj.pose.translation.copy()
    reach = steps * step_size + truncation + voxel_size
    group = [obj] + riders
    allpts = np.concatenate([o.world_points for o in group])
    lo = allpts.min(axis=0) - reach
    hi = allpts.max(axis=0) + reach
    near = [o.world_points for o in others
            if np.all(o.world_points.max(axis=0) >= lo - truncation)
            and np.all(o.world_points.min(axis=0) <= hi + truncation)]
    if not near:
        return group
    grid = build_tsdf(near, voxel_size, truncation, truncation, bounds=(lo, hi))
    rec = receptacle.prism
    pen = _group_pen(group, others)
    for _ in range(steps):
        if pen <= eps_pen:
            break
        # lattice samples sit on grid nodes, where the exact cell gradient is one-sided
        _, grads = grid.query_many(group[0].world_points, central_step=voxel_size / 2)
        g = grads[:, :2].sum(axis=0) - 2.0 * reg_weight * (group[0].pose.translation[:2] - t0[:2])
        norm = np.linalg.norm(g)
        if not np.isfinite(norm) or norm == 0.0:
            break
        step, accepted = step_size, False
        while step >= step_size / 8:
            delta = np.zeros(3)
            delta[:2] = step * g / norm
            trial = _shift(group, delta)
            trial_pen = _group_pen(trial, others)
            if trial_pen <= pen and rec.contains_xy(trial[0].pose.translation[:2]):
                group, pen, accepted = trial, trial_pen, True
                break
            step /= 2
        if not accepted:
            break
    return group


def refine_poses(scene: Scene, steps: int = 10, step_size: float = DEFAULT_STEP, reg_weight: float = DEFAULT_REG,
                 eps_pen: float = EPS_PEN, voxel_size: float = 0.01, truncation: float = 0.05):
    """Push colliding objects apart by TSDF ascent; drop the ones that stay stuck.

    Colliders are handled one at a time, most-penetrating first, with every
    other object frozen. Each moves horizontally up the gradient of the summed
    TSDF over its surface points minus ``reg_weight * |t - t_init|^2``; objects
    stacked on it move along, stacked objects themselves stay put. A step is
    taken only if it does not deepen the penetration (halving otherwise).
    Returns ``(scene, removed_ids)``.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    objs = list(scene.objects)
    pen = pairwise_penetration(objs)
    worst = pen.max(axis=1) if len(objs) else np.zeros(0)
    if not np.any(worst > eps_pen):
        return scene, []
    support = scene.support_height
    removed = []
    for oid in [objs[i].id for i in sorted(range(len(objs)), key=lambda i: (-worst[i], objs[i].id))
                if worst[i] > eps_pen]:
        cur = {o.id: o for o in objs}
        if oid not in cur:
            continue
        obj = cur[oid]
        riders = _riders(obj, objs)
        others = [o for o in objs if o is not obj and o not in riders]
        if _group_pen([obj] + riders, others) <= eps_pen:
            continue
        group = [obj] + riders
        if obj.min_z <= support + 1e-6:
            group = _refine_one(obj, riders, others, scene.receptacle, steps, step_size, reg_weight,
                                eps_pen, voxel_size, truncation)
        moved = {o.id: o for o in group}
        if _group_pen(group, others) > eps_pen:
            drop = {obj.id} | {o.id for o in riders}
            removed += sorted(drop)
            objs = [o for o in objs if o.id not in drop]
        else:
            objs = [moved.get(o.id, o) for o in objs]
    # cleanup: anything still colliding goes, worst first, with whatever rests on it
    while True:
        pen = pairwise_penetration(objs)
        if not pen.size or pen.max() <= eps_pen:
            break
        worst = pen.max(axis=1)
        k = max(range(len(objs)), key=lambda j: (worst[j], objs[j].id))
        drop = {objs[k].id} | {o.id for o in _riders(objs[k], objs)}
        removed += sorted(drop)
        objs = [o for o in objs if o.id not in drop]
    return scene.replace(objs), removed


# --- labeled samples -----------------------------------------------------------------

@dataclass(eq=False)
class LabeledSample:
    scene: Scene
    dropped_object: SceneObject
    gt_pose: Pose
    plans: list
    gt_affordance: AffordanceMap
    seed: int = 0
    name: str = ""

    @property
    def subject_extent(self) -> np.ndarray:
        return self.dropped_object.extent

    def save(self, directory) -> None:
        """Write scene.json, plans.json, gt.json, scene.ply and object.ply."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_scene(self.scene, d / "scene.json")
        save_plans(self.plans, d / "plans.json")
        write_ply(d / "scene.ply", self.scene.cloud())
        write_ply(d / "object.ply", self.dropped_object.points)
        gt = {
            "schema_version": SAMPLE_SCHEMA_VERSION,
            "seed": int(self.seed),
            "gt_pose": self.gt_pose.to_dict(),
            "dropped": {"id": self.dropped_object.id, "category": self.dropped_object.category,
                        "shape": self.dropped_object.shape,
                        "extent": [float(v) for v in self.dropped_object.extent]},
            "reference": self.gt_affordance.reference,
            "affordance": [float(v) for v in self.gt_affordance.activations],
        }
        (d / "gt.json").write_text(json.dumps(gt, indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "LabeledSample":
        d = Path(directory)
        scene = load_scene(d / "scene.json")
        plans = load_plans(d / "plans.json")
        gt = json.loads((d / "gt.json").read_text(encoding="utf-8"))
        if gt.get("schema_version") != SAMPLE_SCHEMA_VERSION:
            raise SchemaError("unsupported sample schema_version")
        pose = Pose.from_dict(gt["gt_pose"])
        info = gt["dropped"]
        pts = shapes.shape_points(info["shape"]) if info.get("shape") else None
        if pts is None:
            from .geometry import read_ply
            pts = read_ply(d / "object.ply").points
        dropped = SceneObject(info["id"], info["category"], pts, pose, info.get("shape"))
        amap = AffordanceMap(np.asarray(gt["affordance"]), gt["reference"])
        return cls(scene, dropped, pose, plans, amap, gt.get("seed", 0), d.name)


def _supports_others(obj: SceneObject, scene: Scene) -> bool:
    return any(o.id != obj.id and o.min_z > scene.support_height + 1e-6 and obj.contains_xy(o.center)
               for o in scene.objects)


def eligible_anchors(scene: Scene, dropped: SceneObject) -> list:
    """Anchors whose relation to ``dropped`` is well defined and whose region holds it."""
    rest = scene.without(dropped.id)
    out = []
    for a in rest.objects:
        try:
            rel = classify_relation(a, dropped, scene.viewer_yaw)
        except AmbiguousRelationError:
            continue
        plan = StructuredPlan.for_anchor(a, rel)
        if plan_region(rest, plan, dropped.extent).contains(dropped.center):
            out.append((a, rel))
    return out


def make_sample(scene: Scene, n_plans: int = 1, rng_seed=0, sigma_scale: float = 1.0) -> LabeledSample:
    """Drop one object and describe where it was with ``n_plans`` anchored relations.

    The dropped object is drawn uniformly among objects that nothing rests on
    and that sit inside the annotated region of at least ``n_plans`` anchors,
    so every sample's ground truth satisfies its own plans.
    """
    if len(scene.objects) < n_plans + 1:
        raise PreconditionError(f"need at least {n_plans + 1} objects, scene has {len(scene.objects)}")
    rng = np.random.default_rng(rng_seed)
    options = []
    for o in scene.objects:
        if _supports_others(o, scene):
            continue
        anchors = eligible_anchors(scene, o)
        if len(anchors) >= n_plans:
            options.append((o, anchors))
    if not options:
        raise InfeasibleSceneError("no object can be dropped with enough well-defined anchors")
    dropped, anchors = options[int(rng.integers(len(options)))]
    picks = sorted(rng.choice(len(anchors), size=n_plans, replace=False).tolist())
    plans = [StructuredPlan.for_anchor(anchors[k][0], anchors[k][1]) for k in picks]
    rest = scene.without(dropped.id)
    mask = None
    on = [p for p in plans if p.direction is Relation.ON]
    if on:
        mask = top_surface_mask(rest, rest.object_by_id(on[0].anchor_id))
    amap = gt_affordance(rest, dropped.pose, dropped.extent, sigma_scale, mask)
    return LabeledSample(rest, dropped, dropped.pose, plans, amap, int(rng_seed) if np.isscalar(rng_seed) else 0)


# --- corpus --------------------------------------------------------------------------

def write_corpus(samples: Sequence[LabeledSample], directory, manifest_extra: Optional[dict] = None) -> Path:
    """One sub-directory per sample plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        name = s.name or f"sample_{i:05d}"
        s.save(d / name)
        entries.append({"name": name, "seed": int(s.seed), "objects": len(s.scene.objects) + 1})
    manifest = {"schema_version": SAMPLE_SCHEMA_VERSION, "samples": entries}
    manifest.update(manifest_extra or {})
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return d


def read_corpus(directory) -> list:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    return [LabeledSample.load(d / e["name"]) for e in manifest["samples"]]
