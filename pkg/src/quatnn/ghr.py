"""Quaternion-valued derivatives of the nine quaternion activations.

The derivative used here is the combination
``(1/4) (da/dw - (da/dx) i - (da/dy) j - (da/dz) k)`` of the four real
partials, with the imaginary units multiplied on the right. `analytic_ghr`
evaluates the closed-form rule per activation, transcribed with explicit
operand ordering (quaternion factors do not commute); `numeric_ghr` is the
central-difference oracle that every analytic rule is validated against.

These derivatives are analysis tools: training gradients come from the
componentwise reverse-mode engine in `autodiff`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, List, Optional, Tuple

from .activations import (
    QUATERNION_KINDS,
    TANH_PI,
    TANHSHRINK_PI,
    ActivationKind,
    AngleConvention,
)
from .quaternion import (
    EPS64,
    I,
    J,
    K,
    DegenerateQuaternionError,
    Quaternion,
    hamilton,
)

if TYPE_CHECKING:
    from .viz import MeshSpec

DEFAULT_H = 1e-6


class UnsupportedKindError(ValueError):
    """Raised for kinds or conventions without an analytic derivative rule."""


@dataclass(frozen=True, slots=True)
class GhrDerivative:
    value: Quaternion

    def magnitude(self) -> float:
        return self.value.norm()


def numeric_ghr(f: Callable[[Quaternion], Quaternion], q: Quaternion,
                h: float = DEFAULT_H) -> GhrDerivative:
    """Finite-difference derivative of an arbitrary quaternion map.

    Each real partial is the central difference along one basis component;
    the partials are then combined with -i, -j, -k Hamilton-multiplied on
    the right and the whole sum scaled by 1/4.
    """
    if h <= 0:
        raise ValueError(f"step must be positive, got {h}")
    parts = []
    for e in (Quaternion.one(), I, J, K):
        fp = f(q + e.scale(h))
        fm = f(q - e.scale(h))
        parts.append((fp - fm).scale(0.5 / h))
    combined = (parts[0] - hamilton(parts[1], I)
                - hamilton(parts[2], J) - hamilton(parts[3], K))
    return GhrDerivative(combined.scale(0.25))


def _require_nondegenerate(q: Quaternion, eps: float) -> None:
    if q.norm() <= eps or q.imag_norm() <= eps:
        raise DegenerateQuaternionError(
            f"derivative rule needs norm and imaginary norm above {eps}, got {q}")


def analytic_ghr(kind: ActivationKind, q: Quaternion,
                 conv: AngleConvention = AngleConvention.PSI,
                 eps: float = EPS64) -> GhrDerivative:
    """Closed-form derivative for one of the nine quaternion kinds (psi only)."""
    if kind not in QUATERNION_KINDS:
        raise UnsupportedKindError(f"no analytic derivative for {kind.value}")
    if conv is not AngleConvention.PSI:
        raise UnsupportedKindError("analytic derivatives cover the psi convention only")
    _require_nondegenerate(q, eps)

    qn = q.norm()
    v = q.imag_norm()
    zv = q.imag()
    cz = q.conj()

    if kind is ActivationKind.NORM:
        return GhrDerivative(Quaternion(3.0 / (4.0 * qn), 0.0, 0.0, 0.0))

    if kind is ActivationKind.MAGNITUDE_TANH:
        t = math.tanh(qn)
        d = 3.0 * t / (4.0 * qn) + (1.0 - t * t) / 4.0
        return GhrDerivative(Quaternion(d, 0.0, 0.0, 0.0))

    if kind is ActivationKind.CARDIOID:
        head = Quaternion(1.0 + 3.0 * q.w / (4.0 * qn), 0.0, 0.0, 0.0)
        return GhrDerivative((head + q.scale(1.0 / (4.0 * qn))).scale(0.5))

    if kind is ActivationKind.PHASE_SIN:
        s = v / qn
        zv_cz = hamilton(zv, cz)
        cos_part = (Quaternion.one() - zv_cz.scale(1.0 / qn ** 2)
                    + cz.scale(1.0 / qn))
        sin_part = (cz.scale(v / qn ** 2) + zv.scale(1.0 / v)
                    + Quaternion(2.0 * qn / v, 0, 0, 0)
                    + zv_cz.scale(1.0 / (v * qn)))
        total = cos_part.scale(math.cos(s)) + sin_part.scale(math.sin(s))
        return GhrDerivative(total.scale(0.25))

    if kind is ActivationKind.SCALED_PHASE_SIN:
        s = math.pi * v / qn
        zv_cz = hamilton(zv, cz)
        cos_part = (Quaternion(math.pi, 0, 0, 0)
                    - zv_cz.scale(math.pi / qn ** 2)
                    + cz.scale(1.0 / qn))
        sin_part = (cz.scale(math.pi * v / qn ** 2) + zv.scale(math.pi / v)
                    + Quaternion(2.0 * qn / v, 0, 0, 0)
                    + zv_cz.scale(1.0 / (v * qn)))
        total = cos_part.scale(math.cos(s)) + sin_part.scale(math.sin(s))
        return GhrDerivative(total.scale(0.25))

    # tanh family: shared structure, scaled variants multiply the transfer
    # slope by their endpoint constant.
    psi = math.atan2(v, q.w)
    t = math.tanh(psi)
    t2 = t * t
    zv_cz = hamilton(zv, cz)

    if kind is ActivationKind.PHASE_TANH:
        g, c = t, 1.0
        slope = c * (1.0 - t2)
    elif kind is ActivationKind.SCALED_PHASE_TANH:
        c = math.pi / TANH_PI
        g = c * t
        slope = c * (1.0 - t2)
    elif kind is ActivationKind.PHASE_TANHSHRINK:
        g, c = psi - t, 1.0
        slope = c * t2
    else:  # scaled phase tanhshrink
        c = math.pi / TANHSHRINK_PI
        g = c * (psi - t)
        slope = c * t2

    cos_part = (Quaternion(q.w * slope / qn, 0, 0, 0)
                - zv.scale(slope / qn)
                + cz.scale(1.0 / qn))
    sin_part = (zv.scale(q.w * slope / (v * qn))
                + zv_cz.scale(1.0 / (v * qn))
                + Quaternion(v * slope / qn + 2.0 * qn / v, 0, 0, 0))
    total = cos_part.scale(math.cos(g)) + sin_part.scale(math.sin(g))
    return GhrDerivative(total.scale(0.25))


def derivative_grid(kind: ActivationKind, grid: "MeshSpec",
                    eps: float = EPS64) -> List[Tuple[float, float, Optional[float]]]:
    """Derivative magnitude over a (re, imaginary-norm) mesh.

    Rows run y-major (imaginary norm outer). Degenerate points carry None.
    """
    rows: List[Tuple[float, float, Optional[float]]] = []
    for im in grid.im_values():
        for re in grid.re_values():
            z = grid.point(re, im)
            try:
                mag = analytic_ghr(kind, z, eps=eps).magnitude()
            except DegenerateQuaternionError:
                mag = None
            rows.append((re, im, mag))
    return rows
