"""Numpy reference kernels: the fallback backend.

Convolutions run as one GEMM per kernel offset against a channels-last
padded copy of the input, which keeps all heavy lifting inside BLAS without
materializing a full im2col buffer.
"""
from __future__ import annotations

import numpy as np

name = "numpy"


def _pad_nhwc(x: np.ndarray, ph: int, pw: int) -> np.ndarray:
    b, c, h, w = x.shape
    xp = np.zeros((b, h + 2 * ph, w + 2 * pw, c), dtype=x.dtype)
    xp[:, ph:ph + h, pw:pw + w, :] = np.moveaxis(x, 1, -1)
    return xp


def conv2d_forward(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Same-size 2D cross-correlation, stride 1, zero padding, odd kernel.

    x: [B, C, H, W], k: [O, C, kh, kw] -> [B, O, H, W].
    """
    b, c, h, w = x.shape
    o, ck, kh, kw = k.shape
    if ck != c:
        raise ValueError(f"channel mismatch: input {c}, kernel {ck}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel extents must be odd, got {kh}x{kw}")
    xp = _pad_nhwc(x, kh // 2, kw // 2)
    acc = np.zeros((b * h * w, o), dtype=x.dtype)
    for dy in range(kh):
        for dx in range(kw):
            cols = xp[:, dy:dy + h, dx:dx + w, :].reshape(b * h * w, c)
            acc += cols @ np.ascontiguousarray(k[:, :, dy, dx].T)
    return np.ascontiguousarray(np.moveaxis(acc.reshape(b, h, w, o), -1, 1))


def conv2d_grad_input(gy: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Gradient wrt the conv input: correlate with the rotated, swapped kernel."""
    kt = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    return conv2d_forward(gy, kt)


def conv2d_grad_kernel(gy: np.ndarray, x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Gradient wrt the conv kernel: one GEMM per kernel offset."""
    b, c, h, w = x.shape
    o = gy.shape[1]
    xp = _pad_nhwc(x, kh // 2, kw // 2)
    g2 = np.moveaxis(gy, 1, -1).reshape(b * h * w, o)
    gk = np.empty((o, c, kh, kw), dtype=x.dtype)
    for dy in range(kh):
        for dx in range(kw):
            cols = xp[:, dy:dy + h, dx:dx + w, :].reshape(b * h * w, c)
            gk[:, :, dy, dx] = g2.T @ cols
    return gk


def avgpool2d_forward(x: np.ndarray, win: int) -> np.ndarray:
    b, c, h, w = x.shape
    if h % win or w % win:
        raise ValueError(f"extents {h}x{w} not divisible by window {win}")
    return x.reshape(b, c, h // win, win, w // win, win).mean(axis=(3, 5))


def avgpool2d_grad(gy: np.ndarray, win: int) -> np.ndarray:
    b, c, ho, wo = gy.shape
    scaled = gy / (win * win)
    out = np.broadcast_to(scaled[:, :, :, None, :, None],
                          (b, c, ho, win, wo, win))
    return out.reshape(b, c, ho * win, wo * win).copy()


def hamilton_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise Hamilton product of stacked component planes [4, ...]."""
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])
