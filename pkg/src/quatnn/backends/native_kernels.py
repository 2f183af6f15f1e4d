"""Backend backed by the compiled _ckernels extension.

Convolution runs as batch-chunked im2col (Cython) feeding a single GEMM per
chunk; pooling and the Hamilton product are fused loops.
"""
from __future__ import annotations

import numpy as np

from . import _ckernels

name = "native"

# im2col working buffer cap; chunks the batch so memory stays bounded.
_COLS_BUDGET_BYTES = 96 << 20


def _pad_nhwc(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    b, c, h, w = x.shape
    xp = np.zeros((b, h + 2 * ph, w + 2 * pw, c), dtype=x.dtype)
    xp[:, ph:ph + h, pw:pw + w, :] = np.moveaxis(x, 1, -1)
    return xp


def _kernel_matrix(k: np.ndarray) -> np.ndarray:
    # [O, C, kh, kw] -> [(kh*kw*C), O] matching im2col column order
    return np.ascontiguousarray(k.transpose(2, 3, 1, 0).reshape(-1, k.shape[0]))


def _check(x, k):
    b, c, h, w = x.shape
    o, ck, kh, kw = k.shape
    if ck != c:
        raise ValueError(f"channel mismatch: input {c}, kernel {ck}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel extents must be odd, got {kh}x{kw}")


def _chunk_size(h, w, kh, kw, c, itemsize):
    per_image = h * w * kh * kw * c * itemsize
    return max(1, _COLS_BUDGET_BYTES // max(1, per_image))


def conv2d_forward(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    _check(x, k)
    b, c, h, w = x.shape
    o, _, kh, kw = k.shape
    xp = _pad_nhwc(x, kh // 2, kw // 2)
    kmat = _kernel_matrix(k)
    out = np.empty((b, h, w, o), dtype=x.dtype)
    step = _chunk_size(h, w, kh, kw, c, x.itemsize)
    cols = np.empty((step * h * w, kh * kw * c), dtype=x.dtype)
    for b0 in range(0, b, step):
        n = min(step, b - b0)
        view = cols[:n * h * w]
        _ckernels.im2col_nhwc(xp[b0:b0 + n], h, w, kh, kw, view, 0)
        np.dot(view, kmat, out=out[b0:b0 + n].reshape(n * h * w, o))
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


def conv2d_grad_input(gy: np.ndarray, k: np.ndarray) -> np.ndarray:
    kt = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return conv2d_forward(gy, kt)


def conv2d_grad_kernel(gy: np.ndarray, x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    b, c, h, w = x.shape
    o = gy.shape[1]
    xp = _pad_nhwc(x, kh // 2, kw // 2)
    g2 = np.moveaxis(gy, 1, -1).reshape(b * h * w, o)
    gkmat = np.zeros((kh * kw * c, o), dtype=x.dtype)
    step = _chunk_size(h, w, kh, kw, c, x.itemsize)
    cols = np.empty((step * h * w, kh * kw * c), dtype=x.dtype)
    for b0 in range(0, b, step):
        n = min(step, b - b0)
        view = cols[:n * h * w]
        _ckernels.im2col_nhwc(xp[b0:b0 + n], h, w, kh, kw, view, 0)
        gkmat += view.T @ g2[b0 * h * w:(b0 + n) * h * w]
    return np.ascontiguousarray(gkmat.reshape(kh, kw, c, o).transpose(3, 2, 0, 1))


def avgpool2d_forward(x: np.ndarray, win: int) -> np.ndarray:
    b, c, h, w = x.shape
    if h % win or w % win:
        raise ValueError(f"extents {h}x{w} not divisible by window {win}")
    x = np.ascontiguousarray(x)
    y = np.empty((b, c, h // win, w // win), dtype=x.dtype)
    _ckernels.avgpool2d_forward(x, win, y)
    return y


def avgpool2d_grad(gy: np.ndarray, win: int) -> np.ndarray:
    b, c, ho, wo = gy.shape
    gy = np.ascontiguousarray(gy)
    gx = np.empty((b, c, ho * win, wo * win), dtype=gy.dtype)
    _ckernels.avgpool2d_grad(gy, win, gx)
    return gx


def hamilton_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    shape = p.shape
    p2 = np.ascontiguousarray(p.reshape(4, -1))
    q2 = np.ascontiguousarray(q.reshape(4, -1))
    out = np.empty_like(p2)
    _ckernels.hamilton_mul(p2, q2, out)
    return out.reshape(shape)
