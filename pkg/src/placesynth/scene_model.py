"""Scenes, objects, the closed relation set and relation geometry.

Relations live in the viewer frame: the camera yaw projected onto the support
plane, with +x pointing right and +y pointing away from the viewer (behind).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

from . import shapes
from .errors import (AmbiguousRelationError, InfeasiblePlanSetError, SchemaError,
                     UnresolvedAnchorError)
from .geometry import (CameraIntrinsics, Pose, PointCloud, as_points, read_ply, robust_centroid,
                       wrap_angle, write_ply)

SCENE_SCHEMA_VERSION = 1
PLAN_SCHEMA_VERSION = 1

STACK_TOLERANCE = 0.02
AMBIGUITY_THRESHOLD = 1e-3
SUPPORT_TOLERANCE = 0.005
TOP_SURFACE_BAND = 0.01
PLAN_MARGIN = 0.02
SECTOR_HALF_WIDTH = math.pi / 8
REGION_HALF_WIDTH = math.pi / 4
_BOUNDARY_EPS = 1e-9
BASE_FACE_TOL = 1e-6


class Relation(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    FRONT = "front"
    BEHIND = "behind"
    LEFT_FRONT = "left_front"
    LEFT_BEHIND = "left_behind"
    RIGHT_FRONT = "right_front"
    RIGHT_BEHIND = "right_behind"
    ON = "on"

    @classmethod
    def parse(cls, text: str) -> "Relation":
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        if key.endswith("_of"):
            key = key[:-3]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown relation {text!r}") from None

    def __str__(self):
        return self.value

    @property
    def angle(self) -> Optional[float]:
        """Viewer-frame direction angle in radians, None for ``on``."""
        return _ANGLES.get(self)


_ANGLES = {
    Relation.RIGHT: 0.0,
    Relation.RIGHT_BEHIND: math.pi / 4,
    Relation.BEHIND: math.pi / 2,
    Relation.LEFT_BEHIND: 3 * math.pi / 4,
    Relation.LEFT: math.pi,
    Relation.LEFT_FRONT: -3 * math.pi / 4,
    Relation.FRONT: -math.pi / 2,
    Relation.RIGHT_FRONT: -math.pi / 4,
}
_SECTORS = [Relation.RIGHT, Relation.RIGHT_BEHIND, Relation.BEHIND, Relation.LEFT_BEHIND,
            Relation.LEFT, Relation.LEFT_FRONT, Relation.FRONT, Relation.RIGHT_FRONT]
COMPASS = tuple(_SECTORS)


def direction_vector(relation: Relation, viewer_yaw: float = 0.0) -> np.ndarray:
    """Unit horizontal vector (scene frame) pointing along a compass relation."""
    ang = relation.angle
    if ang is None:
        raise ValueError("'on' has no horizontal direction")
    return np.array([math.cos(ang + viewer_yaw), math.sin(ang + viewer_yaw)])


def to_viewer(d_xy, viewer_yaw: float) -> np.ndarray:
    c, s = math.cos(viewer_yaw), math.sin(viewer_yaw)
    d = np.asarray(d_xy, dtype=np.float64)
    return np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1]])


def relation_from_offset(d_xy, viewer_yaw: float = 0.0) -> Relation:
    """Bin a horizontal displacement into one of the eight 45 degree sectors."""
    v = to_viewer(d_xy, viewer_yaw)
    ang = math.atan2(v[1], v[0])
    idx = int(math.floor((ang + SECTOR_HALF_WIDTH) / (2 * SECTOR_HALF_WIDTH))) % 8
    return _SECTORS[idx]


# --- convex footprints ------------------------------------------------------

def convex_hull_2d(xy: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull vertices (monotone chain); degenerate inputs give 1-2 points."""
    pts = np.unique(np.round(np.asarray(xy, dtype=np.float64), 12), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


@dataclass(frozen=True, eq=False)
class Prism:
    """Occupancy model: a convex horizontal footprint swept between two heights."""

    hull: np.ndarray
    zmin: float
    zmax: float

    def axes(self) -> np.ndarray:
        h = self.hull
        if len(h) < 2:
            return np.zeros((0, 2))
        edges = np.roll(h, -1, axis=0) - h
        if len(h) == 2:
            edges = edges[:1]
            normals = np.vstack([edges, np.column_stack([-edges[:, 1], edges[:, 0]])])
        else:
            normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        norms = np.linalg.norm(normals, axis=1)
        return normals[norms > 0] / norms[norms > 0, None]

    def contains_xy(self, p, tol: float = 1e-9) -> bool:
        return bool(self.contains_xy_many(np.asarray(p, dtype=np.float64)[None, :2], tol)[0])

    def contains_xy_many(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Boundary-inclusive point-in-footprint test for many points."""
        xy = np.asarray(xy, dtype=np.float64)[:, :2]
        h = self.hull
        if len(h) < 3:
            return np.zeros(len(xy), dtype=bool)
        edges = np.roll(h, -1, axis=0) - h
        lens = np.linalg.norm(edges, axis=1)
        rel = xy[:, None, :] - h[None, :, :]
        crosses = edges[None, :, 0] * rel[..., 1] - edges[None, :, 1] * rel[..., 0]
        return np.all(crosses >= -tol * lens, axis=1)

    def polygon(self) -> Polygon:
        return Polygon(self.hull)

    def support(self, direction) -> float:
        """Extent of the footprint along a unit direction."""
        return float(np.max(self.hull @ np.asarray(direction, dtype=np.float64)))


def prism_from_points(world_points: np.ndarray) -> Prism:
    pts = as_points(world_points)
    return Prism(convex_hull_2d(pts[:, :2]), float(pts[:, 2].min()), float(pts[:, 2].max()))


def penetration_depth(a: Prism, b: Prism) -> float:
    """Minimum translation that separates two occupancy prisms (0 if disjoint).

    Separating axes are the footprint edge normals of both hulls plus gravity.
    Touching prisms (zero overlap) are not penetrating.
    """
    vert = min(a.zmax - b.zmin, b.zmax - a.zmin)
    if vert <= 0.0:
        return 0.0
    axes = np.vstack([a.axes(), b.axes()])
    if len(axes) == 0:
        d = a.hull.mean(axis=0) - b.hull.mean(axis=0)
        return 0.0 if np.linalg.norm(d) > 0 else float(vert)
    pa = a.hull @ axes.T
    pb = b.hull @ axes.T
    overlap = np.minimum(pa.max(axis=0) - pb.min(axis=0), pb.max(axis=0) - pa.min(axis=0))
    horiz = float(overlap.min())
    if horiz <= 0.0:
        return 0.0
    return min(horiz, float(vert))


# --- objects and scenes -----------------------------------------------------

@dataclass(eq=False)
class SceneObject:
    """An object's surface samples (object frame) placed by a scene-frame pose."""

    id: int
    category: str
    points: np.ndarray
    pose: Pose
    shape: Optional[dict] = None

    def __post_init__(self):
        self.id = int(self.id)
        pts = as_points(self.points)
        if pts.shape[0] == 0:
            raise ValueError(f"object {self.id} has no points")
        self.points = pts

    @cached_property
    def extent(self) -> np.ndarray:
        return self.points.max(axis=0) - self.points.min(axis=0)

    @cached_property
    def world_points(self) -> np.ndarray:
        return self.pose.apply(self.points)

    @cached_property
    def center(self) -> np.ndarray:
        """Scene-frame center of the object-frame bounding box."""
        mid = (self.points.max(axis=0) + self.points.min(axis=0)) / 2
        return self.pose.apply(mid[None, :])[0]

    @property
    def min_z(self) -> float:
        return self.prism.zmin

    @property
    def max_z(self) -> float:
        return self.prism.zmax

    @property
    def footprint_radius(self) -> float:
        return footprint_radius(self.extent)

    @cached_property
    def _local_hull(self) -> np.ndarray:
        return convex_hull_2d(self.points[:, :2])

    @cached_property
    def prism(self) -> Prism:
        if self.pose.quat is not None:
            return prism_from_points(self.world_points)
        return prism_at(self._local_hull, self.points[:, 2].min(), self.points[:, 2].max(), self.pose)

    def prism_at(self, pose: Pose) -> Prism:
        return prism_at(self._local_hull, self.points[:, 2].min(), self.points[:, 2].max(), pose)

    def contains_xy(self, p) -> bool:
        return self.prism.contains_xy(p)

    def moved(self, pose: Pose) -> "SceneObject":
        return SceneObject(self.id, self.category, self.points, pose, self.shape)

    def cloud(self) -> PointCloud:
        return PointCloud(self.world_points)


def prism_at(local_hull: np.ndarray, zlo: float, zhi: float, pose: Pose) -> Prism:
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = np.array([[c, -s], [s, c]])
    hull = local_hull @ rot.T + pose.translation[:2]
    return Prism(hull, float(zlo + pose.translation[2]), float(zhi + pose.translation[2]))


def footprint_radius(extent) -> float:
    """Half the larger horizontal side of a bounding box."""
    extent = np.asarray(extent, dtype=np.float64)
    return 0.5 * float(max(extent[0], extent[1]))


@dataclass(frozen=True, eq=False)
class Camera:
    intrinsics: CameraIntrinsics
    pose: Pose

    @property
    def viewer_yaw(self) -> float:
        r = self.pose.rotation()
        return math.atan2(r[1, 0], r[0, 0])


@dataclass(eq=False)
class Scene:
    receptacle: SceneObject
    objects: list
    camera: Optional[Camera] = None
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        self.objects = list(self.objects)
        self.gravity = np.asarray(self.gravity, dtype=np.float64)
        ids = [self.receptacle.id] + [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique within a scene")

    @property
    def viewer_yaw(self) -> float:
        return self.camera.viewer_yaw if self.camera is not None else 0.0

    @property
    def support_height(self) -> float:
        return self.receptacle.max_z

    def object_by_id(self, obj_id: int) -> SceneObject:
        for o in self.objects:
            if o.id == obj_id:
                return o
        raise UnresolvedAnchorError(f"no object with id {obj_id} in scene")

    def without(self, obj_id: int) -> "Scene":
        return Scene(self.receptacle, [o for o in self.objects if o.id != obj_id], self.camera, self.gravity)

    def replace(self, objects) -> "Scene":
        return Scene(self.receptacle, list(objects), self.camera, self.gravity)

    @cached_property
    def _cloud(self):
        parts = [self.receptacle.world_points]
        labels = [np.full(len(self.receptacle.world_points), self.receptacle.id)]
        for o in self.objects:
            # base faces rest on a support; no camera above the table sees them
            z = o.points[:, 2]
            pts = o.world_points[z > z.min() + BASE_FACE_TOL]
            parts.append(pts)
            labels.append(np.full(len(pts), o.id))
        return PointCloud(np.concatenate(parts)), np.concatenate(labels)

    def cloud(self) -> PointCloud:
        """Scene cloud: receptacle points first, then objects (base faces left out) in list order."""
        return self._cloud[0]

    def cloud_labels(self) -> np.ndarray:
        return self._cloud[1]

    @cached_property
    def cloud_id(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.cloud().points).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class StructuredPlan:
    """One pairwise placement constraint: place the subject ``direction`` of an anchor."""

    anchor_id: int
    anchor_category: str
    anchor_position: tuple
    direction: Relation
    anchor_bbox_2d: Optional[tuple] = None

    def to_dict(self) -> dict:
        out = {
            "anchor_id": int(self.anchor_id),
            "anchor_category": self.anchor_category,
            "anchor_position": [float(v) for v in self.anchor_position],
            "direction": self.direction.value,
        }
        if self.anchor_bbox_2d is not None:
            out["anchor_bbox_2d"] = [float(v) for v in self.anchor_bbox_2d]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StructuredPlan":
        bbox = data.get("anchor_bbox_2d")
        return cls(int(data["anchor_id"]), str(data["anchor_category"]),
                   tuple(float(v) for v in data["anchor_position"]),
                   Relation.parse(data["direction"]),
                   tuple(float(v) for v in bbox) if bbox is not None else None)

    @classmethod
    def for_anchor(cls, anchor: SceneObject, direction: Relation) -> "StructuredPlan":
        return cls(anchor.id, anchor.category, tuple(float(v) for v in robust_centroid(anchor.world_points)),
                   direction)


# --- relation classification ------------------------------------------------

def classify_relation(anchor: SceneObject, subject: SceneObject, viewer_yaw: float = 0.0) -> Relation:
    """Relation of ``subject`` with respect to ``anchor``.

    ``on`` when the subject's center is over the anchor's footprint and its base
    is no lower than 2 cm under the anchor's top; otherwise the horizontal
    displacement is binned into 45 degree viewer-frame sectors.
    """
    if anchor.contains_xy(subject.center) and subject.min_z >= anchor.max_z - STACK_TOLERANCE:
        return Relation.ON
    d = subject.center[:2] - anchor.center[:2]
    if np.hypot(d[0], d[1]) < AMBIGUITY_THRESHOLD:
        raise AmbiguousRelationError(
            f"objects {anchor.id} and {subject.id} share a horizontal position")
    return relation_from_offset(d, viewer_yaw)


def classify_offset(offset, viewer_yaw: float = 0.0) -> Relation:
    """Relation for a centroid-only pair (scene-graph edges).

    Without footprints, centroids within the stacking tolerance horizontally are
    treated as a stack; otherwise the offset is binned like
    :func:`classify_relation`.
    """
    offset = np.asarray(offset, dtype=np.float64)
    if np.hypot(offset[0], offset[1]) <= STACK_TOLERANCE:
        return Relation.ON
    return relation_from_offset(offset[:2], viewer_yaw)


def gt_affordance(scene: Scene, gt_pose: Pose, dropped_extent, sigma_scale: float = 1.0,
                  mask: Optional[np.ndarray] = None):
    """Ground-truth activation: a Gaussian around the dropped object's translation.

    ``sigma = sigma_scale * footprint radius``. Activations are normalized so the
    scene point nearest the translation scores 1. ``mask`` restricts the support
    (used for ``on`` labels, which live on the anchor's top surface).
    """
    from .affordance import AffordanceMap

    cloud = scene.cloud()
    sigma = sigma_scale * footprint_radius(dropped_extent)
    d2 = np.sum((cloud.points - gt_pose.translation) ** 2, axis=1)
    act = np.exp(-d2 / (2 * sigma * sigma))
    if mask is not None:
        act = np.where(mask, act, 0.0)
    peak = act.max()
    if peak > 0:
        act = act / peak
    return AffordanceMap(act, scene.cloud_id)


def top_surface_mask(scene: Scene, obj: SceneObject) -> np.ndarray:
    labels = scene.cloud_labels()
    z = scene.cloud().points[:, 2]
    return (labels == obj.id) & (z >= obj.max_z - TOP_SURFACE_BAND)


def free_support_mask(scene: Scene) -> np.ndarray:
    """Receptacle top-surface points not covered by any object's footprint."""
    mask = top_surface_mask(scene, scene.receptacle)
    xy = scene.cloud().points[:, :2]
    for o in scene.objects:
        mask &= ~o.prism.contains_xy_many(xy)
    return mask


# --- annotated regions ------------------------------------------------------

@dataclass(frozen=True)
class SectorBand:
    """Points within a 90 degree sector around a direction and a radial band."""

    anchor_xy: tuple
    angle: float
    r_min: float
    r_max: float
    half_width: float = REGION_HALF_WIDTH

    def contains(self, p) -> bool:
        return bool(self.contains_many(np.asarray(p, dtype=np.float64)[None, :2])[0])

    def contains_many(self, xy: np.ndarray) -> np.ndarray:
        d = np.asarray(xy, dtype=np.float64)[:, :2] - np.asarray(self.anchor_xy)
        r = np.hypot(d[:, 0], d[:, 1])
        radial = (r >= self.r_min - _BOUNDARY_EPS) & (r <= self.r_max + _BOUNDARY_EPS)
        dev = np.abs(wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - self.angle))
        angular = (np.atleast_1d(dev) <= self.half_width + _BOUNDARY_EPS) | (r == 0.0)
        return radial & angular

    def polygon(self, segments: int = 48) -> Polygon:
        th = np.linspace(self.angle - self.half_width, self.angle + self.half_width, segments + 1)
        ax, ay = self.anchor_xy
        outer = np.column_stack([ax + self.r_max * np.cos(th), ay + self.r_max * np.sin(th)])
        inner = np.column_stack([ax + self.r_min * np.cos(th[::-1]), ay + self.r_min * np.sin(th[::-1])])
        return orient(Polygon(np.vstack([outer, inner])))

    @property
    def center(self) -> np.ndarray:
        r = 0.5 * (self.r_min + self.r_max)
        return np.asarray(self.anchor_xy) + r * np.array([math.cos(self.angle), math.sin(self.angle)])


@dataclass(frozen=True, eq=False)
class FootprintRegion:
    """The top footprint of an anchor (for ``on`` plans)."""

    prism: Prism

    def contains(self, p) -> bool:
        return self.prism.contains_xy(p)

    def contains_many(self, xy: np.ndarray) -> np.ndarray:
        return self.prism.contains_xy_many(xy)

    def polygon(self) -> Polygon:
        return self.prism.polygon()

    @property
    def center(self) -> np.ndarray:
        c = self.polygon().centroid
        return np.array([c.x, c.y])


@dataclass(eq=False)
class Region:
    """Intersection of per-plan regions on the support plane."""

    constraints: list
    polygon: Polygon
    point_mask: np.ndarray

    def contains(self, p) -> bool:
        """Boundary-inclusive membership of a point's horizontal projection."""
        return all(c.contains(p) for c in self.constraints)

    @property
    def center(self) -> np.ndarray:
        if len(self.constraints) == 1:
            return self.constraints[0].center
        c = self.polygon.centroid
        xy = np.array([c.x, c.y])
        if self.contains(xy):
            return xy
        rp = self.polygon.representative_point()
        return np.array([rp.x, rp.y])


def plan_region(scene: Scene, plan: StructuredPlan, subject_extent):
    anchor = scene.object_by_id(plan.anchor_id)
    if plan.direction is Relation.ON:
        return FootprintRegion(anchor.prism)
    r_a = anchor.footprint_radius
    r_s = footprint_radius(subject_extent)
    contact = r_a + r_s
    ang = plan.direction.angle + scene.viewer_yaw
    return SectorBand(tuple(float(v) for v in anchor.center[:2]), float(wrap_angle(ang)),
                      contact, contact + 3.0 * r_s)


def annotate_region(scene: Scene, plans: Sequence[StructuredPlan], subject_extent) -> Region:
    """Region where a subject satisfies every plan at once.

    Compass plans contribute the 90 degree sector around their direction,
    radially bounded by ``[r_a + r_s, r_a + 4 r_s]``; ``on`` plans contribute the
    anchor's footprint.
    """
    if not plans:
        raise ValueError("annotate_region needs at least one plan")
    constraints = [plan_region(scene, p, subject_extent) for p in plans]
    poly = constraints[0].polygon()
    for c in constraints[1:]:
        poly = poly.intersection(c.polygon())
    if poly.is_empty or poly.area <= 0.0:
        raise InfeasiblePlanSetError("plan regions do not intersect")
    pts = scene.cloud().points
    mask = np.ones(len(pts), dtype=bool)
    for c in constraints:
        mask &= c.contains_many(pts)
    return Region(constraints, poly, mask)


# --- JSON ---------------------------------------------------------------------

def _object_to_dict(obj: SceneObject, base: Optional[Path], inline: bool) -> dict:
    out = {"id": obj.id, "category": obj.category, "pose": obj.pose.to_dict(),
           "extent": [float(v) for v in obj.extent]}
    if obj.shape is not None:
        out["shape"] = obj.shape
    if inline or (base is None and obj.shape is None):
        out["points"] = [[float(v) for v in row] for row in obj.points]
    elif base is not None and obj.shape is None:
        rel = Path("objects") / f"{obj.id}.ply"
        (base / "objects").mkdir(parents=True, exist_ok=True)
        write_ply(base / rel, obj.points)
        out["points_ply"] = rel.as_posix()
    return out


def _object_from_dict(data: dict, base: Optional[Path]) -> SceneObject:
    shape = data.get("shape")
    if "points" in data:
        pts = np.asarray(data["points"], dtype=np.float64)
    elif "points_ply" in data:
        path = Path(data["points_ply"])
        if not path.is_absolute() and base is not None:
            path = base / path
        pts = read_ply(path).points
    elif shape is not None:
        pts = shapes.shape_points(shape)
    else:
        raise SchemaError(f"object {data.get('id')} has no points, points_ply or shape")
    return SceneObject(int(data["id"]), str(data["category"]), pts, Pose.from_dict(data["pose"]), shape)


def scene_to_dict(scene: Scene, base: Optional[Path] = None, inline: bool = False) -> dict:
    out = {
        "schema_version": SCENE_SCHEMA_VERSION,
        "gravity": [float(v) for v in scene.gravity],
        "receptacle": _object_to_dict(scene.receptacle, base, inline),
        "objects": [_object_to_dict(o, base, inline) for o in scene.objects],
    }
    if scene.camera is not None:
        out["camera"] = {"intrinsics": scene.camera.intrinsics.to_dict(), "pose": scene.camera.pose.to_dict()}
    return out


def scene_from_dict(data: dict, base: Optional[Path] = None) -> Scene:
    if data.get("schema_version") != SCENE_SCHEMA_VERSION:
        raise SchemaError(f"unsupported scene schema_version {data.get('schema_version')!r}")
    camera = None
    if data.get("camera"):
        cam = data["camera"]
        camera = Camera(CameraIntrinsics.from_dict(cam["intrinsics"]), Pose.from_dict(cam["pose"]))
    return Scene(_object_from_dict(data["receptacle"], base),
                 [_object_from_dict(o, base) for o in data.get("objects", [])],
                 camera, data.get("gravity", [0.0, 0.0, -1.0]))


def save_scene(scene: Scene, path, inline: bool = False) -> None:
    """Write scene JSON; point clouds go to PLY files beside it unless ``inline``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = scene_to_dict(scene, None if inline else path.parent, inline)
    path.write_text(json.dumps(data, indent=1, sort_keys=True), encoding="utf-8")


def load_scene(path) -> Scene:
    path = Path(path)
    return scene_from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def plans_to_dict(plans: Sequence[StructuredPlan]) -> dict:
    return {"schema_version": PLAN_SCHEMA_VERSION, "plans": [p.to_dict() for p in plans]}


def plans_from_dict(data) -> list:
    if isinstance(data, list):
        return [StructuredPlan.from_dict(p) for p in data]
    if data.get("schema_version") != PLAN_SCHEMA_VERSION:
        raise SchemaError(f"unsupported plan schema_version {data.get('schema_version')!r}")
    return [StructuredPlan.from_dict(p) for p in data["plans"]]


def save_plans(plans, path) -> None:
    Path(path).write_text(json.dumps(plans_to_dict(plans), indent=1, sort_keys=True), encoding="utf-8")


def load_plans(path) -> list:
    return plans_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
