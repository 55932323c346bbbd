"""Procedural surface samples for upright primitive shapes.

Every shape is returned in its object frame: z up, origin at the center of
the axis-aligned bounding box of the samples. Sampling is lattice based, so a
given set of dimensions always yields the same points in the same order.
"""
from __future__ import annotations

import math

import numpy as np

DEFAULT_SPACING = 0.01


def _count(length: float, spacing: float) -> int:
    return max(2, int(math.ceil(length / spacing)) + 1)


def _face(u_len, v_len, spacing):
    u = np.linspace(-u_len / 2, u_len / 2, _count(u_len, spacing))
    v = np.linspace(-v_len / 2, v_len / 2, _count(v_len, spacing))
    gu, gv = np.meshgrid(u, v, indexing="ij")
    return gu.ravel(), gv.ravel()


def _dedupe(points: np.ndarray) -> np.ndarray:
    keys = np.round(points, 9)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(idx)]


def box_surface(size, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """Lattice samples on the six faces of a box with base at z = 0."""
    sx, sy, sz = (float(v) for v in size)
    faces = []
    a, b = _face(sx, sy, spacing)
    faces += [np.column_stack([a, b, np.zeros_like(a)]), np.column_stack([a, b, np.full_like(a, sz)])]
    a, b = _face(sx, sz, spacing)
    faces += [np.column_stack([a, np.full_like(a, -sy / 2), b + sz / 2]),
              np.column_stack([a, np.full_like(a, sy / 2), b + sz / 2])]
    a, b = _face(sy, sz, spacing)
    faces += [np.column_stack([np.full_like(a, -sx / 2), a, b + sz / 2]),
              np.column_stack([np.full_like(a, sx / 2), a, b + sz / 2])]
    return _dedupe(np.concatenate(faces))


def cylinder_surface(radius: float, height: float, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """Samples on the side wall and both caps of an upright cylinder, base at z = 0."""
    radius = float(radius)
    height = float(height)
    n_theta = max(8, int(math.ceil(2 * math.pi * radius / spacing)))
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    zs = np.linspace(0.0, height, _count(height, spacing))
    tt, zz = np.meshgrid(theta, zs, indexing="ij")
    side = np.column_stack([radius * np.cos(tt.ravel()), radius * np.sin(tt.ravel()), zz.ravel()])
    rings = [np.zeros((1, 2))]
    for r in np.linspace(0.0, radius, _count(radius, spacing))[1:]:
        n = max(6, int(math.ceil(2 * math.pi * r / spacing)))
        th = 2 * math.pi * np.arange(n) / n
        rings.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
    disk = np.concatenate(rings)
    caps = [np.column_stack([disk, np.zeros(len(disk))]), np.column_stack([disk, np.full(len(disk), height)])]
    return _dedupe(np.concatenate([side] + caps))


def center_points(points: np.ndarray) -> np.ndarray:
    """Shift points so their bounding-box center is the origin."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    return points - (lo + hi) / 2


def part_surface(spec: dict, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """Surface samples for one fully specified part, base-centered at its offset."""
    kind = spec["kind"]
    if kind == "box":
        pts = box_surface(spec["size"], spacing)
    elif kind == "cylinder":
        pts = cylinder_surface(spec["radius"], spec["height"], spacing)
    elif kind == "slab":
        pts = receptacle_points(spec["size"], spec.get("spacing", DEFAULT_SPACING))
        pts[:, 2] += float(spec["size"][2]) / 2
    elif kind == "composite":
        pts = np.concatenate([part_surface(p, spacing) for p in spec["parts"]])
        pts = _dedupe(pts)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    offset = np.asarray(spec.get("offset", (0.0, 0.0, 0.0)), dtype=np.float64)
    return pts + offset


def shape_points(spec: dict, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """Centered object-frame samples for a concrete shape description."""
    return center_points(part_surface(spec, spacing))


def receptacle_points(extent, spacing: float = DEFAULT_SPACING) -> np.ndarray:
    """Top face and side rim of a slab; the top face carries the support plane."""
    lx, ly, lz = (float(v) for v in extent)
    a, b = _face(lx, ly, spacing)
    top = np.column_stack([a, b, np.full_like(a, lz)])
    sides = []
    a, b = _face(lx, lz, spacing)
    sides += [np.column_stack([a, np.full_like(a, -ly / 2), b + lz / 2]),
              np.column_stack([a, np.full_like(a, ly / 2), b + lz / 2])]
    a, b = _face(ly, lz, spacing)
    sides += [np.column_stack([np.full_like(a, -lx / 2), a, b + lz / 2]),
              np.column_stack([np.full_like(a, lx / 2), a, b + lz / 2])]
    return center_points(_dedupe(np.concatenate([top] + sides)))
