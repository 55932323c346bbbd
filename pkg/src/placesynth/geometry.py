"""Core numerical types: poses, point clouds, camera model and the TSDF grid."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import _kernels
from .errors import EmptyCloudError

TSDF_SCHEMA_VERSION = 1

DEFAULT_VOXEL_SIZE = 0.01
DEFAULT_TRUNCATION = 0.05
DEFAULT_PADDING = 0.10
# occupancy tests are boundary inclusive; this absorbs lattice rounding
_MASK_TOL = 1e-9


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to [-pi, pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def quat_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid placement transform.

    Planning uses translation plus yaw about the gravity axis. Scene authoring
    may instead supply a unit quaternion ``(w, x, y, z)``; ``yaw`` is then the
    heading of the rotated x axis.
    """

    translation: np.ndarray
    yaw: float = 0.0
    quat: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("pose translation must be finite")
        object.__setattr__(self, "translation", t)
        if self.quat is not None:
            q = np.asarray(self.quat, dtype=np.float64).reshape(4)
            norm = np.linalg.norm(q)
            if not np.isfinite(norm) or norm == 0.0:
                raise ValueError("quaternion must be finite and nonzero")
            q = q / norm
            object.__setattr__(self, "quat", q)
            r = quat_matrix(q)
            object.__setattr__(self, "yaw", wrap_angle(math.atan2(r[1, 0], r[0, 0])))
        else:
            yaw = float(self.yaw)
            if not math.isfinite(yaw):
                raise ValueError("yaw must be finite")
            object.__setattr__(self, "yaw", wrap_angle(yaw))

    def rotation(self) -> np.ndarray:
        if self.quat is not None:
            return quat_matrix(self.quat)
        return yaw_matrix(self.yaw)

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation().T + self.translation

    def with_translation(self, translation) -> "Pose":
        return Pose(translation, self.yaw, self.quat)

    def as_vector(self) -> np.ndarray:
        return np.array([*self.translation, self.yaw])

    @classmethod
    def from_vector(cls, vec) -> "Pose":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[:3], float(vec[3]))

    def to_dict(self) -> dict:
        out = {"t": [float(v) for v in self.translation]}
        if self.quat is not None:
            out["quat"] = [float(v) for v in self.quat]
        else:
            out["yaw"] = float(self.yaw)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Pose":
        if "quat" in data:
            return cls(data["t"], quat=data["quat"])
        return cls(data["t"], float(data.get("yaw", 0.0)))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        if (self.quat is None) != (other.quat is None):
            return False
        same_rot = self.yaw == other.yaw if self.quat is None else np.array_equal(self.quat, other.quat)
        return same_rot and np.array_equal(self.translation, other.translation)

    def __repr__(self):
        t = ", ".join(f"{v:.4f}" for v in self.translation)
        return f"Pose(t=[{t}], yaw={self.yaw:.4f})"


@dataclass(eq=False)
class PointCloud:
    """N x 3 points in meters with an optional per-point activation channel."""

    points: np.ndarray
    activation: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be N x 3, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        self.points = pts
        if self.activation is not None:
            act = np.asarray(self.activation, dtype=np.float64).reshape(-1)
            if act.shape[0] != pts.shape[0]:
                raise ValueError("activation length must match the number of points")
            self.activation = act

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, pose: Pose) -> "PointCloud":
        return PointCloud(pose.apply(self.points), self.activation)


PointsLike = Union[PointCloud, np.ndarray, Sequence[Sequence[float]]]


def as_points(cloud: PointsLike) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 3)
    return pts.reshape(-1, 3)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("fx", "fy", "cx", "cy", "width", "height")}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        return cls(float(data["fx"]), float(data["fy"]), float(data["cx"]), float(data["cy"]),
                   int(data["width"]), int(data["height"]))


def backproject(depth, intrinsics: CameraIntrinsics) -> PointCloud:
    """Lift every valid depth pixel to a camera-frame point (pinhole model).

    Zero, negative and NaN depths are invalid and dropped. Points are ordered
    row-major over the image.
    """
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.isfinite(depth) & (depth > 0)
    if not valid.any():
        raise EmptyCloudError("depth image has no valid pixels")
    v, u = np.nonzero(valid)
    z = depth[v, u]
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return PointCloud(np.stack([x, y, z], axis=1))


def project(points: PointsLike, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pixel coordinates (u, v) of camera-frame points."""
    pts = as_points(points)
    u = intrinsics.fx * pts[:, 0] / pts[:, 2] + intrinsics.cx
    v = intrinsics.fy * pts[:, 1] / pts[:, 2] + intrinsics.cy
    return np.stack([u, v], axis=1)


def robust_centroid(cloud: PointsLike) -> np.ndarray:
    """Component-wise median; even counts average the middle pair."""
    pts = as_points(cloud)
    if pts.shape[0] == 0:
        raise EmptyCloudError("cannot take the centroid of an empty cloud")
    return np.median(pts, axis=0)


def nn_distance(query_points: PointsLike, target: PointsLike | cKDTree) -> np.ndarray:
    """Exact Euclidean distance from each query point to its nearest target point."""
    q = as_points(query_points)
    if isinstance(target, cKDTree):
        tree = target
    else:
        tgt = as_points(target)
        if tgt.shape[0] == 0:
            raise EmptyCloudError("nearest-neighbor target is empty")
        tree = cKDTree(tgt)
    if q.shape[0] == 0:
        raise EmptyCloudError("nearest-neighbor query is empty")
    dist, _ = tree.query(q, k=1)
    return dist


@dataclass(eq=False)
class TsdfGrid:
    """Axis-aligned node grid of truncated signed distances (meters).

    ``values[i, j, k]`` is the field at ``origin + voxel_size * (i, j, k)``.
    """

    origin: np.ndarray
    voxel_size: float
    dims: tuple
    truncation: float
    values: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.dims = tuple(int(d) for d in self.dims)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(self.dims)
        if min(self.dims) < 2:
            raise ValueError("grid needs at least two nodes per axis")

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.voxel_size * (np.asarray(self.dims) - 1)

    def node_positions(self) -> np.ndarray:
        axes = [self.origin[a] + self.voxel_size * np.arange(self.dims[a]) for a in range(3)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)

    def query_many(self, points, central_step: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients at many points; see :func:`tsdf_query`.

        With ``central_step`` the gradient is a central difference of the
        interpolated value instead of the exact cell gradient. That averages
        the two cells meeting at a node, so lattice-aligned samples get a
        symmetric gradient.
        """
        pts = np.ascontiguousarray(as_points(points), dtype=np.float64)
        vals, grads = _kernels.trilinear(self.values, self.origin, float(self.voxel_size),
                                         float(self.truncation), pts)
        if central_step is None:
            return vals, grads
        h = float(central_step)
        grads = np.empty_like(grads)
        for axis in range(3):
            off = np.zeros(3)
            off[axis] = h
            hi, _ = _kernels.trilinear(self.values, self.origin, float(self.voxel_size),
                                       float(self.truncation), pts + off)
            lo, _ = _kernels.trilinear(self.values, self.origin, float(self.voxel_size),
                                       float(self.truncation), pts - off)
            grads[:, axis] = (hi - lo) / (2 * h)
        return vals, grads


def tsdf_query(grid: TsdfGrid, p) -> tuple[float, np.ndarray]:
    """Trilinearly interpolated value and its exact gradient at ``p``.

    Outside the node lattice the field is ``+truncation`` with zero gradient.
    On a cell face the gradient of the upper cell is reported.
    """
    vals, grads = grid.query_many(np.asarray(p, dtype=np.float64).reshape(1, 3))
    return float(vals[0]), grads[0]


def _footprint_hull(xy: np.ndarray):
    try:
        return ConvexHull(xy)
    except (QhullError, ValueError):
        return None


def _inside_mask(grid_origin, voxel, dims, pts, shrink, zpos):
    """Boolean mask of grid nodes inside one object's occupancy.

    A node is inside when it lies in the object's horizontal hull shrunk by
    ``shrink`` and between the object's bottom and top heights in that column.
    """
    mask = np.zeros(dims, dtype=bool)
    hull = _footprint_hull(pts[:, :2])
    if hull is None:
        return mask
    lo = np.floor((pts.min(axis=0) - grid_origin) / voxel).astype(int)
    hi = np.ceil((pts.max(axis=0) - grid_origin) / voxel).astype(int)
    lo = np.clip(lo, 0, np.asarray(dims) - 1)
    hi = np.clip(hi, 0, np.asarray(dims) - 1)
    xs = grid_origin[0] + voxel * np.arange(lo[0], hi[0] + 1)
    ys = grid_origin[1] + voxel * np.arange(lo[1], hi[1] + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    eq = hull.equations
    signed = gx[..., None] * eq[:, 0] + gy[..., None] * eq[:, 1] + eq[:, 2]
    in_hull = np.max(signed, axis=-1) + shrink <= _MASK_TOL
    if not in_hull.any():
        return mask

    # per-column bottom/top heights from points binned on the grid's xy cells
    shape2 = in_hull.shape
    ci = np.rint((pts[:, 0] - xs[0]) / voxel).astype(int)
    cj = np.rint((pts[:, 1] - ys[0]) / voxel).astype(int)
    keep = (ci >= 0) & (ci < shape2[0]) & (cj >= 0) & (cj < shape2[1])
    top = np.full(shape2, -np.inf)
    bot = np.full(shape2, np.inf)
    np.maximum.at(top, (ci[keep], cj[keep]), pts[keep, 2])
    np.minimum.at(bot, (ci[keep], cj[keep]), pts[keep, 2])
    top = ndimage.maximum_filter(top, size=3, mode="constant", cval=-np.inf)
    bot = ndimage.minimum_filter(bot, size=3, mode="constant", cval=np.inf)
    top = np.where(np.isfinite(top), top, pts[:, 2].max())
    bot = np.where(np.isfinite(bot), bot, pts[:, 2].min())

    z = zpos[lo[2]:hi[2] + 1]
    col = in_hull[..., None] & (z >= bot[..., None] - _MASK_TOL) & (z <= top[..., None] + _MASK_TOL)
    mask[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] = col
    return mask


def build_tsdf(
    object_clouds: Iterable[PointsLike],
    voxel_size: float = DEFAULT_VOXEL_SIZE,
    truncation: float = DEFAULT_TRUNCATION,
    padding: float = DEFAULT_PADDING,
    bounds: Optional[tuple] = None,
) -> TsdfGrid:
    """Voxelize object surface samples into a truncated signed distance grid.

    Unsigned distances go to the union of all points; nodes inside an object's
    occupancy (see :func:`_inside_mask`) are negated. Values are clamped to
    ``[-truncation, truncation]``. The grid spans the union bounding box grown
    by ``padding`` unless explicit ``bounds=(lo, hi)`` are given.
    """
    clouds = [as_points(c) for c in object_clouds]
    clouds = [c for c in clouds if c.shape[0] > 0]
    if not clouds:
        raise EmptyCloudError("build_tsdf needs at least one non-empty cloud")
    allpts = np.concatenate(clouds, axis=0)
    if not np.all(np.isfinite(allpts)):
        raise ValueError("object clouds contain non-finite points")
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    if truncation < 2 * voxel_size:
        raise ValueError("truncation must be at least two voxels")
    if padding < truncation:
        raise ValueError("padding must be at least the truncation distance")

    if bounds is None:
        lo = allpts.min(axis=0) - padding
        hi = allpts.max(axis=0) + padding
    else:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)
    # the tolerance keeps spans that are whole voxel multiples from gaining a node to rounding
    cells = np.ceil((hi - lo) / voxel_size - 1e-9).astype(int)
    dims = tuple(int(d) for d in np.maximum(cells + 1, 2))
    axes = [lo[a] + voxel_size * np.arange(dims[a]) for a in range(3)]
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    dist, _ = cKDTree(allpts).query(nodes, k=1, distance_upper_bound=truncation)
    values = np.minimum(dist, truncation).reshape(dims)

    inside = np.zeros(dims, dtype=bool)
    for pts in clouds:
        inside |= _inside_mask(lo, voxel_size, dims, pts, voxel_size, axes[2])
    values[inside] = -values[inside]
    return TsdfGrid(lo, float(voxel_size), dims, float(truncation), values)


# --- file formats -----------------------------------------------------------

def write_ply(path, cloud: PointsLike) -> None:
    """ASCII PLY with double coordinates and an optional activation property."""
    pts = as_points(cloud)
    act = cloud.activation if isinstance(cloud, PointCloud) else None
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if act is not None:
        lines.append("property double activation")
    lines.append("end_header")
    rows = pts if act is None else np.column_stack([pts, act])
    body = ["  ".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines + body) + "\n", encoding="ascii")


def read_ply(path) -> PointCloud:
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text or text[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n = None
    props = []
    i = 1
    while i < len(text):
        line = text[i].strip()
        i += 1
        if line.startswith("format") and "ascii" not in line:
            raise ValueError(f"{path}: only ascii PLY is supported")
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
        elif line.startswith("property"):
            props.append(line.split()[-1])
        elif line == "end_header":
            break
    if n is None:
        raise ValueError(f"{path}: missing vertex element")
    data = np.array([[float(v) for v in row.split()] for row in text[i:i + n]], dtype=np.float64)
    data = data.reshape(n, len(props))
    cols = {name: data[:, k] for k, name in enumerate(props)}
    pts = np.stack([cols["x"], cols["y"], cols["z"]], axis=1)
    return PointCloud(pts, cols.get("activation"))


def save_tsdf(grid: TsdfGrid, path) -> None:
    """Write ``<path>`` (JSON header) and a row-major float32 payload beside it."""
    path = Path(path)
    payload = path.with_suffix(".bin")
    header = {
        "schema_version": TSDF_SCHEMA_VERSION,
        "origin": [float(v) for v in grid.origin],
        "dims": list(grid.dims),
        "voxel_size": grid.voxel_size,
        "truncation": grid.truncation,
        "dtype": "float32",
        "order": "C",
        "payload": payload.name,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True), encoding="utf-8")
    payload.write_bytes(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def load_tsdf(path) -> TsdfGrid:
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    raw = np.frombuffer((path.parent / header["payload"]).read_bytes(), dtype="<f4")
    values = raw.astype(np.float64).reshape(header["dims"])
    return TsdfGrid(header["origin"], header["voxel_size"], header["dims"], header["truncation"], values)
