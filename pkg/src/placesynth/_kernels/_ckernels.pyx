# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trilinear kernels for TSDF queries."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def trilinear(const double[:, :, ::1] values, origin, double voxel_size,
              double truncation, const double[:, ::1] points):
    """Trilinear value and exact gradient of the interpolated field.

    Points outside the node lattice get ``truncation`` and a zero gradient.
    """
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t nx = values.shape[0], ny = values.shape[1], nz = values.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double inv = 1.0 / voxel_size
    out_v = np.empty(n, dtype=np.float64)
    out_g = np.zeros((n, 3), dtype=np.float64)
    cdef double[::1] vv = out_v
    cdef double[:, ::1] gg = out_g
    cdef Py_ssize_t m, i, j, k
    cdef double fx, fy, fz, tx, ty, tz, ux, uy, uz
    cdef double c000, c100, c010, c110, c001, c101, c011, c111
    cdef double c00, c10, c01, c11, c0, c1
    with nogil:
        for m in range(n):
            fx = (points[m, 0] - ox) * inv
            fy = (points[m, 1] - oy) * inv
            fz = (points[m, 2] - oz) * inv
            if (fx < 0.0 or fy < 0.0 or fz < 0.0 or fx > nx - 1 or fy > ny - 1
                    or fz > nz - 1 or fx != fx or fy != fy or fz != fz):
                vv[m] = truncation
                continue
            i = <Py_ssize_t>floor(fx)
            j = <Py_ssize_t>floor(fy)
            k = <Py_ssize_t>floor(fz)
            if i > nx - 2:
                i = nx - 2
            if j > ny - 2:
                j = ny - 2
            if k > nz - 2:
                k = nz - 2
            tx = fx - i
            ty = fy - j
            tz = fz - k
            ux = 1.0 - tx
            uy = 1.0 - ty
            uz = 1.0 - tz
            c000 = values[i, j, k]
            c100 = values[i + 1, j, k]
            c010 = values[i, j + 1, k]
            c110 = values[i + 1, j + 1, k]
            c001 = values[i, j, k + 1]
            c101 = values[i + 1, j, k + 1]
            c011 = values[i, j + 1, k + 1]
            c111 = values[i + 1, j + 1, k + 1]
            c00 = c000 * ux + c100 * tx
            c10 = c010 * ux + c110 * tx
            c01 = c001 * ux + c101 * tx
            c11 = c011 * ux + c111 * tx
            c0 = c00 * uy + c10 * ty
            c1 = c01 * uy + c11 * ty
            vv[m] = c0 * uz + c1 * tz
            gg[m, 0] = inv * (((c100 - c000) * uy + (c110 - c010) * ty) * uz
                              + ((c101 - c001) * uy + (c111 - c011) * ty) * tz)
            gg[m, 1] = inv * ((c10 - c00) * uz + (c11 - c01) * tz)
            gg[m, 2] = inv * (c1 - c0)
    return out_v, out_g
