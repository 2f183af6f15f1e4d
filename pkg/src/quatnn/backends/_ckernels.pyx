# Compiled hot loops: patch extraction for convolution, pooling, and the
# fused elementwise Hamilton product. GEMMs stay in BLAS via numpy; these
# kernels cover the memory-bound parts around them.
from libc.string cimport memcpy

import numpy as np

cimport numpy as cnp

ctypedef fused real:
    float
    double


def im2col_nhwc(real[:, :, :, ::1] xp, Py_ssize_t h, Py_ssize_t w,
                Py_ssize_t kh, Py_ssize_t kw, real[:, ::1] cols,
                Py_ssize_t row0):
    """Fill cols[row0 + b*h*w + y*w + x, (dy*kw+dx)*C : ...] from padded NHWC input."""
    cdef Py_ssize_t b = xp.shape[0]
    cdef Py_ssize_t c = xp.shape[3]
    cdef Py_ssize_t bi, yi, xi, dy, dx, row
    cdef size_t nbytes = c * sizeof(real)
    for bi in range(b):
        for yi in range(h):
            for xi in range(w):
                row = row0 + (bi * h + yi) * w + xi
                for dy in range(kh):
                    for dx in range(kw):
                        memcpy(&cols[row, (dy * kw + dx) * c],
                               &xp[bi, yi + dy, xi + dx, 0], nbytes)


def avgpool2d_forward(real[:, :, :, ::1] x, Py_ssize_t win, real[:, :, :, ::1] y):
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t ho = y.shape[2], wo = y.shape[3]
    cdef Py_ssize_t bi, ci, yi, xi, dy, dx
    cdef real acc, inv = <real> (1.0 / (win * win))
    for bi in range(b):
        for ci in range(c):
            for yi in range(ho):
                for xi in range(wo):
                    acc = 0
                    for dy in range(win):
                        for dx in range(win):
                            acc = acc + x[bi, ci, yi * win + dy, xi * win + dx]
                    y[bi, ci, yi, xi] = acc * inv


def avgpool2d_grad(real[:, :, :, ::1] gy, Py_ssize_t win, real[:, :, :, ::1] gx):
    cdef Py_ssize_t b = gy.shape[0], c = gy.shape[1]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t bi, ci, yi, xi, dy, dx
    cdef real g, inv = <real> (1.0 / (win * win))
    for bi in range(b):
        for ci in range(c):
            for yi in range(ho):
                for xi in range(wo):
                    g = gy[bi, ci, yi, xi] * inv
                    for dy in range(win):
                        for dx in range(win):
                            gx[bi, ci, yi * win + dy, xi * win + dx] = g


def hamilton_mul(real[:, ::1] p, real[:, ::1] q, real[:, ::1] out):
    """Elementwise Hamilton product over flattened planes [4, N]."""
    cdef Py_ssize_t i, n = p.shape[1]
    cdef real pw, px, py, pz, qw, qx, qy, qz
    for i in range(n):
        pw = p[0, i]; px = p[1, i]; py = p[2, i]; pz = p[3, i]
        qw = q[0, i]; qx = q[1, i]; qy = q[2, i]; qz = q[3, i]
        out[0, i] = pw * qw - px * qx - py * qy - pz * qz
        out[1, i] = pw * qx + px * qw + py * qz - pz * qy
        out[2, i] = pw * qy - px * qz + py * qw + pz * qx
        out[3, i] = pw * qz + px * qy - py * qx + pz * qw
