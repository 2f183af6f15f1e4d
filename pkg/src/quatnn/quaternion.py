"""Quaternion algebra: Hamilton products, norms, phases and polar form.

Everything that touches a single quaternion lives here. Scalars are plain
Python floats (64-bit); vectorized carriers use :class:`QTensor`, which keeps
the four real component planes separate so that downstream tensor code can
operate on them independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

EPS64 = 1e-12
EPS32 = 1e-6


def eps_for(dtype) -> float:
    """Degeneracy threshold on norms for the given float width."""
    return EPS32 if np.dtype(dtype) == np.float32 else EPS64


class DegenerateQuaternionError(ValueError):
    """Strict-mode error: the operation needs a norm above the threshold."""


@dataclass(frozen=True, slots=True)
class Quaternion:
    """One element of H with real part ``w`` and imaginary parts ``x, y, z``."""

    w: float
    x: float
    y: float
    z: float

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w + other.w, self.x + other.x,
                          self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - other.w, self.x - other.x,
                          self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return hamilton(self, other)
        return self.scale(float(other))

    def __rmul__(self, other) -> "Quaternion":
        return self.scale(float(other))

    def scale(self, s: float) -> "Quaternion":
        return Quaternion(s * self.w, s * self.x, s * self.y, s * self.z)

    def conj(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x
                         + self.y * self.y + self.z * self.z)

    def imag_norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def imag(self) -> "Quaternion":
        return Quaternion(0.0, self.x, self.y, self.z)

    def components(self) -> Tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self.components())

    @staticmethod
    def zero() -> "Quaternion":
        return Quaternion(0.0, 0.0, 0.0, 0.0)

    @staticmethod
    def one() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)


ONE = Quaternion.one()
I = Quaternion(0.0, 1.0, 0.0, 0.0)
J = Quaternion(0.0, 0.0, 1.0, 0.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


@dataclass(frozen=True, slots=True)
class Polar:
    """Polar decomposition ``q = magnitude * (cos(phase) + axis * sin(phase))``.

    ``axis`` is None when the imaginary vector is degenerate; then the
    quaternion is purely real and ``phase`` is 0 or pi.
    """

    magnitude: float
    axis: Optional[Tuple[float, float, float]]
    phase: float


def hamilton(p: Quaternion, q: Quaternion) -> Quaternion:
    """Non-commutative product ``p (x) q`` by componentwise expansion."""
    return Quaternion(
        p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
        p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
        p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
        p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w,
    )


def add(p: Quaternion, q: Quaternion) -> Quaternion:
    return p + q


def conj(q: Quaternion) -> Quaternion:
    return q.conj()


def norm(q: Quaternion) -> float:
    return q.norm()


def imag_norm(q: Quaternion) -> float:
    return q.imag_norm()


def phase_psi(q: Quaternion, strict: bool = True, eps: float = EPS64) -> float:
    """Angle between the real part and the imaginary vector, in [0, pi].

    atan2 of (imaginary norm, real part). Degenerate quaternions (norm below
    ``eps``) raise in strict mode and fall back to 0 otherwise.
    """
    if q.norm() <= eps:
        if strict:
            raise DegenerateQuaternionError(
                f"phase undefined for near-zero quaternion {q}")
        return 0.0
    return math.atan2(q.imag_norm(), q.w)


def angle_theta(q: Quaternion, strict: bool = True, eps: float = EPS64) -> float:
    """Rotation angle reading of the same quaternion: twice the phase, in [0, 2pi]."""
    return 2.0 * phase_psi(q, strict=strict, eps=eps)


def to_polar(q: Quaternion, strict: bool = True, eps: float = EPS64) -> Polar:
    n = q.norm()
    if n <= eps:
        if strict:
            raise DegenerateQuaternionError(
                f"polar form undefined for near-zero quaternion {q}")
        return Polar(0.0, None, 0.0)
    v = q.imag_norm()
    psi = math.atan2(v, q.w)
    if v <= eps:
        return Polar(n, None, 0.0 if q.w >= 0.0 else math.pi)
    return Polar(n, (q.x / v, q.y / v, q.z / v), psi)


def from_polar(p: Polar) -> Quaternion:
    c = math.cos(p.phase)
    if p.axis is None:
        return Quaternion(p.magnitude * c, 0.0, 0.0, 0.0)
    s = p.magnitude * math.sin(p.phase)
    return Quaternion(p.magnitude * c,
                      s * p.axis[0], s * p.axis[1], s * p.axis[2])


class QTensor:
    """N-dimensional quaternion array stored as four real component planes.

    The planes share one shape and dtype and are frozen on construction;
    treat instances as immutable values.
    """

    __slots__ = ("w", "x", "y", "z", "shape", "dtype")

    def __init__(self, w, x, y, z, copy: bool = True):
        planes = [np.array(p, copy=copy) for p in (w, x, y, z)]
        shape = planes[0].shape
        dtype = planes[0].dtype
        for p in planes[1:]:
            if p.shape != shape:
                raise ValueError(f"component plane shapes differ: {p.shape} vs {shape}")
            if p.dtype != dtype:
                raise ValueError(f"component plane dtypes differ: {p.dtype} vs {dtype}")
        if dtype not in (np.float32, np.float64):
            planes = [p.astype(np.float64) for p in planes]
            dtype = np.dtype(np.float64)
        for p in planes:
            p.flags.writeable = False
        self.w, self.x, self.y, self.z = planes
        self.shape = tuple(shape)
        self.dtype = dtype

    @classmethod
    def zeros(cls, shape: Sequence[int], dtype=np.float64) -> "QTensor":
        shape = tuple(shape)
        return cls(*(np.zeros(shape, dtype=dtype) for _ in range(4)), copy=False)

    @classmethod
    def from_quaternions(cls, quats: Iterable[Quaternion],
                         shape: Sequence[int], dtype=np.float64) -> "QTensor":
        comps = np.array([q.components() for q in quats], dtype=dtype)
        shape = tuple(shape)
        if comps.shape[0] != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(f"{comps.shape[0]} quaternions cannot fill shape {shape}")
        return cls(*(comps[:, c].reshape(shape) for c in range(4)), copy=False)

    def planes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.w, self.x, self.y, self.z)

    @property
    def size(self) -> int:
        return int(self.w.size)

    def item(self, index) -> Quaternion:
        return Quaternion(float(self.w[index]), float(self.x[index]),
                          float(self.y[index]), float(self.z[index]))

    def quaternions(self) -> list:
        flat = [p.reshape(-1) for p in self.planes()]
        return [Quaternion(float(flat[0][i]), float(flat[1][i]),
                           float(flat[2][i]), float(flat[3][i]))
                for i in range(self.size)]

    def norms(self) -> np.ndarray:
        return np.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)

    def imag_norms(self) -> np.ndarray:
        return np.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)

    def astype(self, dtype) -> "QTensor":
        return QTensor(*(p.astype(dtype) for p in self.planes()), copy=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTensor):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.planes(), other.planes()))

    def __repr__(self) -> str:
        return f"QTensor(shape={self.shape}, dtype={self.dtype})"


def hamilton_tensor(p: QTensor, q: QTensor) -> QTensor:
    """Elementwise Hamilton product of two equally shaped quaternion tensors."""
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    from .backends import active

    out = active.hamilton_mul(np.stack(p.planes()), np.stack(q.planes()))
    return QTensor(out[0], out[1], out[2], out[3], copy=False)
