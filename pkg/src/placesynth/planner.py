"""Guided diffusion over 4-DOF placement poses (x, y, z, yaw).

Chains start from a Gaussian prior around the denoiser's target frame and run
the usual ancestral DDPM updates. At every step the denoiser's clean-pose
estimate is corrected by the gradient of an affordance-alignment cost and a
TSDF penetration cost, scaled by the step's posterior variance, before the
posterior mean is formed.
"""
from __future__ import annotations

import logging
import math
from functools import cached_property
from dataclasses import dataclass, field, asdict
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .affordance import AffordanceMap, compose_coarse, compose_fine, high_affordance_points, plan_affordance
from .errors import EmptyCloudError, InfeasiblePlanSetError
from .geometry import Pose, TsdfGrid, as_points, build_tsdf, wrap_angle
from .scene_model import Relation, Scene, StructuredPlan, annotate_region

log = logging.getLogger(__name__)

G_MAX = 0.05
HALF_TURN = math.pi


# --- schedule -------------------------------------------------------------------

@dataclass(eq=False)
class NoiseSchedule:
    """Variance schedule; index ``k - 1`` holds the quantities of step ``k``."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(b <= 0) or np.any(b >= 1) or np.any(np.diff(b) < 0):
            raise ValueError("betas must be non-decreasing inside (0, 1)")
        self.betas = b
        self.alphas = 1.0 - b
        self.alpha_bar = np.cumprod(self.alphas)
        self.alpha_bar_prev = np.concatenate([[1.0], self.alpha_bar[:-1]])
        # posterior q(x_{k-1} | x_k, x_0) variance and mean coefficients
        self.posterior_var = b * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)
        self.coef_x0 = np.sqrt(self.alpha_bar_prev) * b / (1.0 - self.alpha_bar)
        self.coef_xk = np.sqrt(self.alphas) * (1.0 - self.alpha_bar_prev) / (1.0 - self.alpha_bar)

    @property
    def K(self) -> int:  # noqa: N802 - conventional name for the step count
        return self.betas.shape[0]

    @classmethod
    def linear(cls, steps: int = 50, beta_start: float = 1e-4, beta_end: float = 0.02,
               rescale: bool = True) -> "NoiseSchedule":
        """Linear betas. ``rescale`` stretches the range by ``1000 / steps``.

        The stretch keeps the total noise of a 1000-step schedule when fewer
        steps are used, so the final marginal is close to the prior.
        """
        f = 1000.0 / steps if rescale else 1.0
        b = np.linspace(beta_start * f, beta_end * f, steps)
        return cls(np.minimum(b, 0.999))

    def check_step(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ValueError(f"step {k} outside 1..{self.K}")


def forward_noise(pose0: Pose, k: int, schedule: NoiseSchedule, rng: np.random.Generator,
                  trans_scale: float = 0.15, yaw_scale: float = math.pi / 2, reference=None) -> Pose:
    """Sample the closed-form marginal q(T^k | T^0) around ``reference`` (origin by default)."""
    schedule.check_step(k)
    ab = schedule.alpha_bar[k - 1]
    ref = np.zeros(3) if reference is None else np.asarray(reference, dtype=np.float64)
    eps = rng.standard_normal(4)
    t = ref + math.sqrt(ab) * (pose0.translation - ref) + math.sqrt(1 - ab) * trans_scale * eps[:3]
    yaw = math.sqrt(ab) * pose0.yaw + math.sqrt(1 - ab) * yaw_scale * eps[3]
    return Pose(t, float(wrap_angle(yaw)))


# --- conditioning and the denoiser ------------------------------------------------------------

def spatial_feature(pose_k: Pose, amap: AffordanceMap, scene_cloud) -> float:
    """Inverse-distance weighted mean of the map around the pose translation."""
    return float(_spatial_feature_many(np.asarray(pose_k.translation)[None, :], amap.activations,
                                       as_points(scene_cloud))[0])


def _spatial_feature_many(t: np.ndarray, act: np.ndarray, pts: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(pts[None, :, :] - t[:, None, :], axis=2)
    w = 1.0 / (d + 1e-6)
    return (w @ act) / w.sum(axis=1)


def wrap_half(angle):
    """Wrap to [-pi/2, pi/2): footprints here are symmetric under a half turn."""
    return np.mod(np.asarray(angle) + HALF_TURN / 2, HALF_TURN) - HALF_TURN / 2


def principal_yaw(points: np.ndarray) -> float:
    """Angle of the long horizontal axis of object-frame points."""
    xy = points[:, :2] - points[:, :2].mean(axis=0)
    cov = xy.T @ xy / max(len(xy), 1)
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, int(np.argmax(vals))]
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return math.atan2(v[1], v[0])


@dataclass(eq=False)
class DenoiserCondition:
    object_points: np.ndarray
    coarse_map: AffordanceMap
    sampled_points: np.ndarray
    sampled_weights: np.ndarray
    support_z: float
    base_offset: float
    anchor_xy: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.sampled_points) < 1:
            raise ValueError("need at least one sampled affordance point")

    @cached_property
    def target(self) -> np.ndarray:
        """Activation-weighted mean of the sampled points, lifted to resting height."""
        w = self.sampled_weights
        xy = (w[:, None] * self.sampled_points[:, :2]).sum(axis=0) / w.sum()
        return np.array([xy[0], xy[1], self.support_z + self.base_offset])

    @cached_property
    def target_yaw(self) -> float:
        """Yaw putting the long footprint axis along the tangent around the anchor."""
        t = self.target
        tangent = 0.0
        if self.anchor_xy is not None:
            d = t[:2] - self.anchor_xy
            if np.hypot(d[0], d[1]) > 1e-9:
                tangent = math.atan2(d[1], d[0]) + math.pi / 2
        return float(wrap_half(tangent - principal_yaw(self.object_points)))

    @cached_property
    def frame(self) -> np.ndarray:
        """Origin of the diffusion frame: target translation and yaw."""
        return np.append(self.target, self.target_yaw)


def sample_condition(object_points, coarse_map: AffordanceMap, scene_cloud, k_a: int, rng: np.random.Generator,
                     support_z: float, anchor_xy=None) -> DenoiserCondition:
    pts = as_points(scene_cloud)
    act = coarse_map.activations
    total = act.sum()
    if total <= 0:
        raise ValueError("coarse map has no positive activation")
    idx = rng.choice(len(pts), size=k_a, replace=True, p=act / total)
    obj = as_points(object_points)
    return DenoiserCondition(obj, coarse_map, pts[idx], act[idx], float(support_z), float(-obj[:, 2].min()),
                             None if anchor_xy is None else np.asarray(anchor_xy, dtype=np.float64)[:2])


def blend(current, target, gamma):
    """gamma * target + (1 - gamma) * current."""
    return gamma * np.asarray(target) + (1.0 - gamma) * np.asarray(current)


class Denoiser(Protocol):
    def predict_many(self, poses: np.ndarray, a_k: np.ndarray, cond: DenoiserCondition, k: int,
                     schedule: NoiseSchedule) -> np.ndarray:
        """Clean-pose estimates for rows ``(x, y, z, yaw)`` at step ``k``."""


@dataclass
class AnalyticDenoiser:
    """Closed-form stand-in for a learned pose denoiser.

    Treats the clean pose as Gaussian around the condition's target with
    standard deviations ``target_std`` (m) and ``yaw_std`` (rad) and returns its
    posterior mean given the noisy pose: the target blended with the noisy pose
    rescaled by ``1/sqrt(alpha_bar)``, weight ``gamma`` on the target.
    """

    trans_scale: float = 0.15
    yaw_scale: float = math.pi / 2
    target_std: float = 0.01
    yaw_std: float = 0.1

    def gamma(self, k: int, schedule: NoiseSchedule) -> np.ndarray:
        ab = schedule.alpha_bar[k - 1]
        s2 = np.array([self.trans_scale] * 3 + [self.yaw_scale]) ** 2
        v = np.array([self.target_std] * 3 + [self.yaw_std]) ** 2
        return (1 - ab) * s2 / (ab * v + (1 - ab) * s2)

    def predict_many(self, poses, a_k, cond, k, schedule):
        ab = max(float(schedule.alpha_bar[k - 1]), 1e-12)
        frame = cond.frame
        rel = to_frame(poses, frame)
        est = blend(rel / math.sqrt(ab), np.zeros(4), self.gamma(k, schedule))
        return from_frame(est, frame)

    def predict(self, pose_k: Pose, a_k: float, cond: DenoiserCondition, k: int, schedule: NoiseSchedule) -> Pose:
        row = self.predict_many(pose_to_row(pose_k)[None, :], np.array([a_k]), cond, k, schedule)[0]
        return row_to_pose(row)


def analytic_denoiser(pose_k: Pose, a_k: float, cond: DenoiserCondition, k: int, schedule: NoiseSchedule,
                      denoiser: Optional[AnalyticDenoiser] = None) -> Pose:
    return (denoiser or AnalyticDenoiser()).predict(pose_k, a_k, cond, k, schedule)


def pose_to_row(pose: Pose) -> np.ndarray:
    return np.append(pose.translation, pose.yaw)


def row_to_pose(row) -> Pose:
    return Pose(np.asarray(row[:3], dtype=np.float64), float(wrap_angle(row[3])))


def to_frame(rows: np.ndarray, frame: np.ndarray) -> np.ndarray:
    rel = np.asarray(rows, dtype=np.float64) - frame
    rel[..., 3] = wrap_half(rel[..., 3])
    return rel


def from_frame(rel: np.ndarray, frame: np.ndarray) -> np.ndarray:
    out = np.asarray(rel, dtype=np.float64) + frame
    out[..., 3] = wrap_angle(out[..., 3])
    return out


# --- costs --------------------------------------------------------------------------------

def _transform_many(rows: np.ndarray, obj: np.ndarray):
    """World points ``(C, M, 3)`` and their yaw derivatives for pose rows."""
    c, s = np.cos(rows[:, 3]), np.sin(rows[:, 3])
    ox, oy = obj[:, 0][None, :], obj[:, 1][None, :]
    px = c[:, None] * ox - s[:, None] * oy
    py = s[:, None] * ox + c[:, None] * oy
    pts = np.stack([px, py, np.broadcast_to(obj[:, 2], px.shape)], axis=2) + rows[:, None, :3]
    dyaw = np.stack([-py, px, np.zeros_like(px)], axis=2)
    return pts, dyaw


def _pose_grad(per_point: np.ndarray, dyaw: np.ndarray) -> np.ndarray:
    """Chain rule from per-point gradients ``(C, M, 3)`` to pose rows ``(C, 4)``."""
    return np.concatenate([per_point.sum(axis=1), (per_point * dyaw).sum(axis=(1, 2))[:, None]], axis=1)


def _afford_many(rows, obj, xh: np.ndarray, tree: cKDTree, correspondences=None):
    pts, dyaw = _transform_many(rows, obj)
    if correspondences is None:
        _, idx = tree.query(pts.reshape(-1, 3))
        idx = idx.reshape(pts.shape[:2])
    else:
        idx = np.broadcast_to(np.asarray(correspondences), pts.shape[:2])
    diff = pts - xh[idx]
    cost = np.sum(diff * diff, axis=(1, 2))
    return cost, _pose_grad(2.0 * diff, dyaw), idx


def _collide_many(rows, obj, grid: Optional[TsdfGrid]):
    if grid is None:
        return np.zeros(len(rows)), np.zeros((len(rows), 4))
    pts, dyaw = _transform_many(rows, obj)
    vals, grads = grid.query_many(pts.reshape(-1, 3))
    vals = vals.reshape(pts.shape[:2])
    grads = grads.reshape(pts.shape)
    inside = vals < 0
    cost = -np.where(inside, vals, 0.0).sum(axis=1)
    per_point = np.where(inside[..., None], -grads, 0.0)
    return cost, _pose_grad(per_point, dyaw)


def cost_afford(pose0: Pose, object_points, high_points, correspondences=None):
    """Sum of squared distances from posed object points to their nearest high-affordance point.

    Returns ``(cost, gradient)`` with the gradient over ``(x, y, z, yaw)``.
    Passing ``correspondences`` (indices into ``high_points``) freezes the
    nearest-neighbor assignment.
    """
    xh = as_points(high_points)
    if xh.shape[0] == 0:
        raise EmptyCloudError("no high-affordance points")
    cost, grad, _ = _afford_many(pose_to_row(pose0)[None, :], as_points(object_points), xh, cKDTree(xh),
                                 correspondences)
    return float(cost[0]), grad[0]


def nearest_indices(pose0: Pose, object_points, high_points) -> np.ndarray:
    pts = pose0.apply(as_points(object_points))
    return cKDTree(as_points(high_points)).query(pts)[1]


def cost_collide(pose0: Pose, object_points, grid: TsdfGrid):
    """Total penetration depth of posed object points into the TSDF, with its pose gradient."""
    cost, grad = _collide_many(pose_to_row(pose0)[None, :], as_points(object_points), grid)
    return float(cost[0]), grad[0]


# --- guidance ----------------------------------------------------------------------

@dataclass
class GuidanceConfig:
    lambda_a: float = 500.0
    lambda_c: float = 1000.0
    threshold_frac: float = 0.5
    afford: bool = True
    collide: bool = True
    g_max: float = G_MAX

    def __post_init__(self):
        if self.lambda_a < 0 or self.lambda_c < 0:
            raise ValueError("guidance weights must be non-negative")

    @property
    def weights(self):
        return (self.lambda_a if self.afford else 0.0, self.lambda_c if self.collide else 0.0)

    @property
    def active(self) -> bool:
        return any(w > 0 for w in self.weights)


@dataclass(eq=False)
class CostContext:
    """Everything the guidance costs need, fixed for one planning query."""

    object_points: np.ndarray
    high_points: np.ndarray
    grid: Optional[TsdfGrid]
    support_z: float
    base_offset: float
    tree: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        self.tree = cKDTree(self.high_points)

    def snap(self, rows: np.ndarray) -> np.ndarray:
        out = np.array(rows, dtype=np.float64)
        out[:, 2] = self.support_z + self.base_offset
        return out

    def evaluate(self, rows: np.ndarray, guidance: GuidanceConfig):
        """Per-row (weighted total, afford, collide, gradient of the total)."""
        rows = self.snap(rows)
        lam_a, lam_c = guidance.weights
        ja, ga, _ = _afford_many(rows, self.object_points, self.high_points, self.tree)
        jc, gc = _collide_many(rows, self.object_points, self.grid)
        total = lam_a * ja + lam_c * jc
        grad = lam_a * ga + lam_c * gc
        grad[:, 2] = 0.0  # resting height is fixed
        return total, ja, jc, grad


@dataclass
class StepDiagnostics:
    nonfinite: int = 0
    clamped: int = 0


def _reverse_many(rows, k, cond, schedule, denoiser, guidance, ctx, noise, scene_points, diag: StepDiagnostics,
                  trans_scale, yaw_scale):
    a_k = _spatial_feature_many(rows[:, :3], cond.coarse_map.activations, scene_points)
    est = denoiser.predict_many(rows, a_k, cond, k, schedule)
    frame = cond.frame
    est_rel = to_frame(est, frame)
    if guidance.active and ctx is not None:
        _, _, _, grad = ctx.evaluate(est, guidance)
        bad = ~np.isfinite(grad)
        if bad.any():
            diag.nonfinite += int(bad.sum())
            grad = np.where(bad, 0.0, grad)
        var = schedule.posterior_var[k - 1] * np.array([trans_scale] * 3 + [yaw_scale]) ** 2
        step = -var * grad
        over = np.abs(step) > guidance.g_max
        diag.clamped += int(over.sum())
        est_rel = est_rel + np.clip(step, -guidance.g_max, guidance.g_max)
        est_rel[:, 3] = wrap_half(est_rel[:, 3])
    rel = to_frame(rows, frame)
    mean = schedule.coef_x0[k - 1] * est_rel + schedule.coef_xk[k - 1] * rel
    if k > 1:
        sd = math.sqrt(schedule.posterior_var[k - 1]) * np.array([trans_scale] * 3 + [yaw_scale])
        mean = mean + sd * noise
    return from_frame(mean, frame)


def guided_reverse_step(pose_k: Pose, k: int, cond: DenoiserCondition, schedule: NoiseSchedule,
                        guidance: GuidanceConfig, ctx: Optional[CostContext], rng: np.random.Generator,
                        denoiser=None, scene_cloud=None, trans_scale: float = 0.15,
                        yaw_scale: float = math.pi / 2, diagnostics: Optional[StepDiagnostics] = None) -> Pose:
    """One ancestral step T^k -> T^{k-1} with cost-corrected clean-pose estimate."""
    schedule.check_step(k)
    denoiser = denoiser or AnalyticDenoiser(trans_scale, yaw_scale)
    pts = as_points(scene_cloud) if scene_cloud is not None else cond.sampled_points
    if scene_cloud is None:
        cond = DenoiserCondition(cond.object_points, AffordanceMap(cond.sampled_weights), cond.sampled_points,
                                 cond.sampled_weights, cond.support_z, cond.base_offset, cond.anchor_xy)
    noise = rng.standard_normal(4)[None, :]
    row = _reverse_many(pose_to_row(pose_k)[None, :], k, cond, schedule, denoiser, guidance, ctx, noise, pts,
                        diagnostics or StepDiagnostics(), trans_scale, yaw_scale)[0]
    return row_to_pose(row)


# --- planning ----------------------------------------------------------------------

@dataclass
class PlannerConfig:
    steps: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.02
    rescale_betas: bool = True
    trans_scale: float = 0.15
    yaw_scale: float = math.pi / 2
    target_std: float = 0.01
    yaw_std: float = 0.1
    k_a: int = 64
    kmeans_k: int = 2
    top_k: Optional[int] = None
    max_object_points: int = 200
    voxel_size: float = 0.01
    truncation: float = 0.05
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.steps, self.beta_start, self.beta_end, self.rescale_betas)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerConfig":
        data = dict(data)
        g = data.pop("guidance", None)
        cfg = cls(**data)
        if g is not None:
            cfg.guidance = GuidanceConfig(**g)
        return cfg


@dataclass(eq=False)
class Candidate:
    pose: Pose
    cost: float
    afford_cost: float
    collide_cost: float
    index: int
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"t": [float(v) for v in self.pose.translation], "yaw": float(self.pose.yaw),
                "final_cost": float(self.cost), "afford_cost": float(self.afford_cost),
                "collide_cost": float(self.collide_cost), "chain": self.index, "diagnostics": self.diagnostics}


def _subsample(points: np.ndarray, limit: int) -> np.ndarray:
    if len(points) <= limit:
        return points
    idx = np.linspace(0, len(points) - 1, limit).round().astype(int)
    return points[idx]


def plan_placement(scene: Scene, plans: Sequence[StructuredPlan], object_points, n_candidates: int = 8,
                   config: Optional[PlannerConfig] = None, seed: int = 0, denoiser=None,
                   return_context: bool = False):
    """Sample ``n_candidates`` guided chains and rank the final poses by guided cost.

    ``object_points`` are in the object frame; they are re-centered on their
    bounding box, so returned translations are bounding-box centers.
    """
    if not plans:
        raise ValueError("plan_placement needs at least one plan")
    cfg = config or PlannerConfig()
    obj = as_points(object_points)
    if obj.shape[0] == 0:
        raise EmptyCloudError("object has no points")
    obj = obj - (obj.min(axis=0) + obj.max(axis=0)) / 2
    extent = obj.max(axis=0) - obj.min(axis=0)
    try:
        annotate_region(scene, plans, extent)
    except InfeasiblePlanSetError:
        log.warning("plans have no common region; planning anyway")

    cloud = scene.cloud().points
    maps = [plan_affordance(scene, p, extent) for p in plans]
    coarse = compose_coarse(maps, cloud, k=cfg.kmeans_k, top_k=cfg.top_k)
    fine = compose_fine(maps)
    high = high_affordance_points(fine, cloud, cfg.guidance.threshold_frac).points

    support = scene.support_height
    on = [p for p in plans if p.direction is Relation.ON]
    if on:
        support = scene.object_by_id(on[0].anchor_id).max_z
    anchor = scene.object_by_id(plans[0].anchor_id)
    cond = sample_condition(obj, coarse, cloud, cfg.k_a, np.random.default_rng([seed, 1]), support,
                            None if on else anchor.center[:2])
    grid = None
    if scene.objects:
        grid = build_tsdf([o.world_points for o in scene.objects], cfg.voxel_size, cfg.truncation,
                          max(0.10, cfg.truncation))
    ctx = CostContext(_subsample(obj, cfg.max_object_points), high, grid, support, cond.base_offset)
    schedule = cfg.schedule()
    denoiser = denoiser or AnalyticDenoiser(cfg.trans_scale, cfg.yaw_scale, cfg.target_std, cfg.yaw_std)
    scales = np.array([cfg.trans_scale] * 3 + [cfg.yaw_scale])

    rngs = [np.random.default_rng([seed, 0, c]) for c in range(n_candidates)]
    frame = cond.frame
    rows = from_frame(np.array([r.standard_normal(4) for r in rngs]) * scales, frame)
    diag = StepDiagnostics()
    for k in range(schedule.K, 0, -1):
        noise = np.array([r.standard_normal(4) for r in rngs])
        rows = _reverse_many(rows, k, cond, schedule, denoiser, cfg.guidance, ctx, noise, cloud, diag,
                             cfg.trans_scale, cfg.yaw_scale)
    rows = ctx.snap(rows)
    total, ja, jc, _ = ctx.evaluate(rows, cfg.guidance)
    info = {"nonfinite_gradients": diag.nonfinite, "clamped_components": diag.clamped}
    cands = [Candidate(row_to_pose(rows[c]), float(total[c]), float(ja[c]), float(jc[c]), c, dict(info))
             for c in range(n_candidates)]
    cands.sort(key=lambda c: (c.cost, c.index))
    if return_context:
        return cands, {"coarse": coarse, "fine": fine, "high_points": high, "condition": cond, "grid": grid}
    return cands

