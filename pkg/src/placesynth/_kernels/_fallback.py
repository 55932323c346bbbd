"""Pure numpy implementations of the compiled kernels."""
import numpy as np


def trilinear(values, origin, voxel_size, truncation, points):
    """Trilinear value and exact gradient of the interpolated field.

    Points outside the node lattice get ``truncation`` and a zero gradient.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    dims = np.asarray(values.shape)
    out_v = np.full(n, float(truncation))
    out_g = np.zeros((n, 3))
    f = (points - np.asarray(origin, dtype=np.float64)) / voxel_size
    ok = np.all((f >= 0.0) & (f <= dims - 1), axis=1)
    if not ok.any():
        return out_v, out_g
    f = f[ok]
    idx = np.minimum(np.floor(f).astype(np.int64), dims - 2)
    t = f - idx
    u = 1.0 - t
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    c000 = values[i, j, k]
    c100 = values[i + 1, j, k]
    c010 = values[i, j + 1, k]
    c110 = values[i + 1, j + 1, k]
    c001 = values[i, j, k + 1]
    c101 = values[i + 1, j, k + 1]
    c011 = values[i, j + 1, k + 1]
    c111 = values[i + 1, j + 1, k + 1]
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    ux, uy, uz = u[:, 0], u[:, 1], u[:, 2]
    c00 = c000 * ux + c100 * tx
    c10 = c010 * ux + c110 * tx
    c01 = c001 * ux + c101 * tx
    c11 = c011 * ux + c111 * tx
    c0 = c00 * uy + c10 * ty
    c1 = c01 * uy + c11 * ty
    out_v[ok] = c0 * uz + c1 * tz
    inv = 1.0 / voxel_size
    g = np.empty((f.shape[0], 3))
    g[:, 0] = inv * (((c100 - c000) * uy + (c110 - c010) * ty) * uz
                     + ((c101 - c001) * uy + (c111 - c011) * ty) * tz)
    g[:, 1] = inv * ((c10 - c00) * uz + (c11 - c01) * tz)
    g[:, 2] = inv * (c1 - c0)
    out_g[ok] = g
    return out_v, out_g
