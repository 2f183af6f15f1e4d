"""Dataset ingestion: CIFAR-10 binary batches, the QIMG container, and the
quaternion input encoding.

QIMG layout (little-endian): magic "QIM1", u32 count, u32 height, u32
width, u32 channels, then `count` label bytes, then count*H*W*C pixel
bytes row-major channel-last.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .quaternion import QTensor

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 1024 channel-planar pixels
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)
QIMG_MAGIC = b"QIM1"


class DatasetError(ValueError):
    pass


@dataclass
class DatasetHandle:
    images: np.ndarray  # uint8 [N, H, W, 3], RGB channel-last
    labels: np.ndarray  # uint8 [N], values 0..9
    split: str

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError(
                f"images {self.images.shape} do not match labels {self.labels.shape}")
        if self.labels.size and self.labels.max() > 9:
            raise DatasetError(f"labels must be 0..9, found {self.labels.max()}")

    def __len__(self):
        return self.images.shape[0]

    def subset(self, n: int) -> "DatasetHandle":
        return DatasetHandle(self.images[:n], self.labels[:n], self.split)


def _read_cifar_file(path: str) -> Tuple[np.ndarray, np.ndarray]:
    if not os.path.exists(path):
        raise DatasetError(f"missing CIFAR-10 batch file: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD_BYTES:
        n = max(1, round(raw.size / CIFAR_RECORD_BYTES))
        raise DatasetError(
            f"{path}: truncated at byte {raw.size}, expected {CIFAR_RECORD_BYTES}*N"
            f" (e.g. {CIFAR_RECORD_BYTES * n} for {n} records)")
    records = raw.reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].copy()
    # channel-planar 3x1024 -> interleaved HWC
    pixels = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).copy()
    return pixels, labels


def load_cifar10(data_dir: str) -> Tuple[DatasetHandle, DatasetHandle]:
    """Read the six standard binary batches from `data_dir`."""
    train_parts = [_read_cifar_file(os.path.join(data_dir, f)) for f in CIFAR_TRAIN_FILES]
    test_parts = [_read_cifar_file(os.path.join(data_dir, f)) for f in CIFAR_TEST_FILES]
    train = DatasetHandle(np.concatenate([p[0] for p in train_parts]),
                          np.concatenate([p[1] for p in train_parts]), "train")
    test = DatasetHandle(np.concatenate([p[0] for p in test_parts]),
                         np.concatenate([p[1] for p in test_parts]), "test")
    return train, test


def load_qimg(path: str, split: str = "") -> DatasetHandle:
    with open(path, "rb") as fh:
        header = fh.read(20)
        if len(header) < 20:
            raise DatasetError(f"{path}: short read in header")
        if header[:4] != QIMG_MAGIC:
            raise DatasetError(f"{path}: bad magic {header[:4]!r}")
        count, height, width, channels = struct.unpack("<4I", header[4:])
        if channels != 3 or height == 0 or width == 0:
            raise DatasetError(
                f"{path}: bad extents count={count} h={height} w={width} c={channels}")
        labels = np.frombuffer(fh.read(count), dtype=np.uint8)
        if labels.size != count:
            raise DatasetError(f"{path}: short read in labels ({labels.size}/{count})")
        expect = count * height * width * channels
        pixels = np.frombuffer(fh.read(expect), dtype=np.uint8)
        if pixels.size != expect:
            raise DatasetError(f"{path}: short read in pixels ({pixels.size}/{expect})")
    images = pixels.reshape(count, height, width, channels).copy()
    return DatasetHandle(images, labels.copy(), split or os.path.basename(path))


def encode_quaternion(images: np.ndarray, dtype=np.float32) -> QTensor:
    """RGB bytes -> quaternions: zero real part, R, G, B in the imaginary
    slots, scaled to [0, 1]. Output shape [N, 1, H, W]."""
    if images.ndim != 4 or images.shape[-1] != 3:
        raise DatasetError(f"expected [N, H, W, 3] byte images, got {images.shape}")
    n, h, w, _ = images.shape
    scaled = images.astype(dtype) / 255.0
    zeros = np.zeros((n, 1, h, w), dtype=dtype)
    chans = np.moveaxis(scaled, -1, 1).reshape(n, 3, h, w)
    return QTensor(zeros, chans[:, :1], chans[:, 1:2], chans[:, 2:3], copy=False)


def packed_input(t: QTensor) -> np.ndarray:
    """QTensor [N, C, H, W] -> packed network input [N, 4C, H, W]."""
    n, c, h, w = t.shape
    return np.stack(t.planes(), axis=1).reshape(n, 4 * c, h, w)


def synthetic_dataset(n: int, seed: int, noise: float = 40.0,
                      size: int = 32, split: str = "train") -> DatasetHandle:
    """Class-patterned random images; a learnable stand-in when the real
    datasets are not on disk."""
    rng = np.random.default_rng(seed)
    prototypes = rng.integers(0, 256, size=(10, size, size, 3))
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    images = prototypes[labels].astype(np.float64)
    images += rng.normal(0.0, noise, size=images.shape)
    return DatasetHandle(np.clip(images, 0, 255).astype(np.uint8), labels, split)
