"""Per-plan affordance fields over the scene cloud and their composition."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import PlaceSynthError
from .geometry import PointCloud, as_points
from .scene_model import (PLAN_MARGIN, Relation, Scene, StructuredPlan, direction_vector,
                          footprint_radius, free_support_mask, top_surface_mask)

HEIGHT_CUTOFF = 0.03
COARSE_SIGMA = 0.05
ACTIVE_THRESHOLD = 0.1
KMEANS_ITERS = 20
KMEANS_TOL = 1e-6


@dataclass(eq=False)
class AffordanceMap:
    """Activations in [0, 1], index-aligned with a referenced scene cloud."""

    activations: np.ndarray
    reference: str = ""

    def __post_init__(self):
        act = np.asarray(self.activations, dtype=np.float64).reshape(-1)
        if act.size and (act.min() < 0.0 or act.max() > 1.0):
            raise ValueError("activations must lie in [0, 1]")
        self.activations = act

    def __len__(self):
        return self.activations.shape[0]

    def save(self, path, params: Optional[dict] = None) -> None:
        """float32 payload plus a JSON sidecar naming the reference cloud."""
        path = Path(path)
        path.with_suffix(".bin").write_bytes(self.activations.astype("<f4").tobytes())
        sidecar = {"schema_version": 1, "reference": self.reference, "count": len(self),
                   "dtype": "float32", "payload": path.with_suffix(".bin").name, "params": params or {}}
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "AffordanceMap":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        raw = np.frombuffer((path.parent / meta["payload"]).read_bytes(), dtype="<f4")
        return cls(raw.astype(np.float64), meta["reference"])


def plan_target(scene: Scene, plan: StructuredPlan, subject_extent, margin: float = PLAN_MARGIN) -> np.ndarray:
    """Target point on the support plane for one compass plan.

    The subject center sits ``r_anchor + r_subject + margin`` from the anchor
    position along the plan direction.
    """
    anchor = scene.object_by_id(plan.anchor_id)
    r_a = anchor.footprint_radius
    r_s = footprint_radius(subject_extent)
    delta = r_a + r_s + margin
    u = direction_vector(plan.direction, scene.viewer_yaw)
    pos = np.asarray(plan.anchor_position, dtype=np.float64)
    return np.array([pos[0] + delta * u[0], pos[1] + delta * u[1], scene.support_height])


def plan_affordance(scene: Scene, plan: StructuredPlan, subject_extent,
                    margin: float = PLAN_MARGIN) -> AffordanceMap:
    """Analytic affordance for one plan over the scene cloud.

    Compass plans: Gaussian (sigma = subject footprint radius) around the
    target point, kept only on free support points (receptacle top outside
    every footprint); if none of those is active, on points at most 3 cm above
    the support plane. ``on``: a
    Gaussian over the anchor's top-surface points, centered on the anchor top.
    """
    anchor = scene.object_by_id(plan.anchor_id)
    pts = scene.cloud().points
    r_s = footprint_radius(subject_extent)
    if plan.direction is Relation.ON:
        mask = top_surface_mask(scene, anchor)
        top = anchor.center.copy()
        top[2] = anchor.max_z
        sigma = max(r_s, anchor.footprint_radius)
        d2 = np.sum((pts - top) ** 2, axis=1)
        act = np.where(mask, np.exp(-d2 / (2 * sigma * sigma)), 0.0)
    else:
        target = plan_target(scene, plan, subject_extent, margin)
        d2 = np.sum((pts - target) ** 2, axis=1)
        act = np.exp(-d2 / (2 * r_s * r_s))
        free = free_support_mask(scene)
        if np.any(act[free] > 0):
            act = np.where(free, act, 0.0)
        else:  # nothing free nearby: fall back to everything low enough to stand on
            act[pts[:, 2] > scene.support_height + HEIGHT_CUTOFF] = 0.0
    return AffordanceMap(np.clip(act, 0.0, 1.0), scene.cloud_id)


def compose_fine(maps: Sequence[AffordanceMap]) -> AffordanceMap:
    """Pointwise maximum over the input maps and their elementwise mean."""
    if not maps:
        raise ValueError("compose_fine needs at least one map")
    stack = np.stack([m.activations for m in maps])
    fine = np.max(np.vstack([stack, stack.mean(axis=0, keepdims=True)]), axis=0)
    return AffordanceMap(fine, maps[0].reference)


def weighted_kmeans(points: np.ndarray, weights: np.ndarray, k: int, seed: int = 0,
                    iters: int = KMEANS_ITERS, tol: float = KMEANS_TOL):
    """Weighted k-means with k-means++ seeding.

    Returns ``(centers, labels)``. Fewer than ``k`` centers come back when the
    weighted points have fewer distinct locations.
    """
    rng = np.random.default_rng(seed)
    w = weights / weights.sum()
    first = rng.choice(len(points), p=w)
    centers = [points[first]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        score = w * d2
        total = score.sum()
        if total <= 0.0:
            break
        nxt = rng.choice(len(points), p=score / total)
        centers.append(points[nxt])
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    centers = np.array(centers)
    labels = np.zeros(len(points), dtype=int)
    for _ in range(iters):
        dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1)
        new = centers.copy()
        for c in range(len(centers)):
            sel = labels == c
            if w[sel].sum() > 0:
                new[c] = np.average(points[sel], axis=0, weights=w[sel])
        shift = np.max(np.linalg.norm(new - centers, axis=1))
        centers = new
        if shift < tol:
            break
    dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(dist, axis=1)
    return centers, labels


def compose_coarse(maps: Sequence[AffordanceMap], scene_cloud, k: int = 2, top_k: Optional[int] = None,
                   sigma: float = COARSE_SIGMA, seed: int = 0, return_centers: bool = False):
    """Distance-based activation around the heaviest k-means centers.

    Maps are max-pooled; points with pooled activation above 0.1 are clustered
    (activation-weighted, weights normalized to sum 1). The ``top_k`` centers
    by assigned activation define ``exp(-d^2 / (2 sigma^2))`` with ``d`` the
    distance to the nearest selected center.
    """
    if not maps:
        raise ValueError("compose_coarse needs at least one map")
    pts = as_points(scene_cloud)
    pooled = np.max(np.stack([m.activations for m in maps]), axis=0)
    if pooled.shape[0] != pts.shape[0]:
        raise ValueError("maps are not aligned with the scene cloud")
    active = pooled > ACTIVE_THRESHOLD
    if not active.any():
        raise PlaceSynthError("all affordance maps are (near) zero")
    top_k = k if top_k is None else top_k
    centers, labels = weighted_kmeans(pts[active], pooled[active], k, seed)
    mass = np.array([pooled[active][labels == c].sum() for c in range(len(centers))])
    order = sorted(range(len(centers)), key=lambda c: (-mass[c], c))
    chosen = centers[order[:max(1, top_k)]]
    d2 = np.min(np.sum((pts[:, None, :] - chosen[None, :, :]) ** 2, axis=2), axis=1)
    coarse = AffordanceMap(np.exp(-d2 / (2 * sigma * sigma)), maps[0].reference)
    if return_centers:
        return coarse, chosen
    return coarse


def high_affordance_points(amap: AffordanceMap, scene_cloud, threshold_frac: float = 0.5) -> PointCloud:
    """Points whose activation reaches ``threshold_frac`` of the map's maximum."""
    pts = as_points(scene_cloud)
    peak = amap.activations.max() if len(amap) else 0.0
    if peak <= 0.0:
        raise PlaceSynthError("affordance map has no positive activation")
    keep = amap.activations >= threshold_frac * peak
    return PointCloud(pts[keep], amap.activations[keep])
