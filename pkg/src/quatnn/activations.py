"""The eleven activation functions in both angle conventions.

Three families:

* magnitude class (norm, magnitude-tanh, cardioid): output is a nonnegative
  scalar multiple of the input, so component ratios and phase are preserved;
* phase class (phase-tanh, phase-tanhshrink, their scaled variants,
  phase-sin, scaled-phase-sin): the angle between real part and imaginary
  vector is passed through a nonlinearity while the magnitude is preserved;
* split class (split-relu, split-tanh): the real baseline, applied to each
  component independently.

The forward rules are written once over the four component planes
(`_apply_planes`). The `ops` argument supplies the math functions, which is
what lets the same formula drive plain numpy arrays, the scalar path, and
autodiff variables without duplication.
"""
from __future__ import annotations

import math
from enum import Enum
from types import SimpleNamespace

import numpy as np

from .quaternion import (
    EPS64,
    DegenerateQuaternionError,
    Quaternion,
    QTensor,
    eps_for,
)

TANH_PI = math.tanh(math.pi)
TANHSHRINK_PI = math.pi - TANH_PI
PI = math.pi


class ActivationKind(Enum):
    NORM = "norm"
    MAGNITUDE_TANH = "magnitude-tanh"
    CARDIOID = "cardioid"
    PHASE_TANH = "phase-tanh"
    PHASE_TANHSHRINK = "phase-tanhshrink"
    SCALED_PHASE_TANH = "scaled-phase-tanh"
    SCALED_PHASE_TANHSHRINK = "scaled-phase-tanhshrink"
    PHASE_SIN = "phase-sin"
    SCALED_PHASE_SIN = "scaled-phase-sin"
    SPLIT_RELU = "split-relu"
    SPLIT_TANH = "split-tanh"

    @classmethod
    def from_name(cls, name: str) -> "ActivationKind":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown activation {name!r}; expected one of {known}") from None


class AngleConvention(Enum):
    """Which angle feeds the nonlinearity: the phase psi in [0, pi], or the
    rotation angle theta = 2 psi in [0, 2 pi]."""

    PSI = "psi"
    THETA = "theta"

    @classmethod
    def from_name(cls, name: str) -> "AngleConvention":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown angle convention {name!r}; expected psi or theta") from None


MAGNITUDE_KINDS = frozenset({
    ActivationKind.NORM,
    ActivationKind.MAGNITUDE_TANH,
    ActivationKind.CARDIOID,
})
PHASE_KINDS = frozenset({
    ActivationKind.PHASE_TANH,
    ActivationKind.PHASE_TANHSHRINK,
    ActivationKind.SCALED_PHASE_TANH,
    ActivationKind.SCALED_PHASE_TANHSHRINK,
    ActivationKind.PHASE_SIN,
    ActivationKind.SCALED_PHASE_SIN,
})
SPLIT_KINDS = frozenset({ActivationKind.SPLIT_RELU, ActivationKind.SPLIT_TANH})
QUATERNION_KINDS = MAGNITUDE_KINDS | PHASE_KINDS

# Kinds whose output is undefined at the origin (strict mode raises there).
_NORM_SENSITIVE = frozenset({ActivationKind.NORM}) | PHASE_KINDS


_NP_OPS = SimpleNamespace(
    sqrt=np.sqrt,
    tanh=np.tanh,
    sin=np.sin,
    cos=np.cos,
    atan2=np.arctan2,
    relu=lambda a: np.maximum(a, 0.0),
    value=lambda a: a,
)


def phase_transfer(kind: ActivationKind, angle, ops=_NP_OPS):
    """Scalar transfer applied to the angle by a phase-class activation."""
    if kind is ActivationKind.PHASE_TANH:
        return ops.tanh(angle)
    if kind is ActivationKind.PHASE_TANHSHRINK:
        return angle - ops.tanh(angle)
    if kind is ActivationKind.SCALED_PHASE_TANH:
        return (PI / TANH_PI) * ops.tanh(angle)
    if kind is ActivationKind.SCALED_PHASE_TANHSHRINK:
        return (PI / TANHSHRINK_PI) * (angle - ops.tanh(angle))
    if kind is ActivationKind.PHASE_SIN:
        return ops.sin(angle)
    if kind is ActivationKind.SCALED_PHASE_SIN:
        return PI * ops.sin(angle)
    raise ValueError(f"{kind} has no phase transfer")


def phase_transfer_derivative(kind: ActivationKind, angle: float) -> float:
    """d/d angle of the phase transfer, for the analytic derivative rules."""
    t = math.tanh(angle)
    if kind is ActivationKind.PHASE_TANH:
        return 1.0 - t * t
    if kind is ActivationKind.PHASE_TANHSHRINK:
        return t * t
    if kind is ActivationKind.SCALED_PHASE_TANH:
        return (PI / TANH_PI) * (1.0 - t * t)
    if kind is ActivationKind.SCALED_PHASE_TANHSHRINK:
        return (PI / TANHSHRINK_PI) * (t * t)
    if kind is ActivationKind.PHASE_SIN:
        return math.cos(angle)
    if kind is ActivationKind.SCALED_PHASE_SIN:
        return PI * math.cos(angle)
    raise ValueError(f"{kind} has no phase transfer")


def output_phase(kind: ActivationKind, conv: AngleConvention, angle_in: float) -> float:
    """Phase transfer as a plain scalar map (identity for the magnitude class).

    ``angle_in`` is already in the convention's domain: psi in [0, pi] or the
    substituted theta in [0, 2 pi].
    """
    if kind in MAGNITUDE_KINDS:
        return float(angle_in)
    if kind in PHASE_KINDS:
        return float(phase_transfer(kind, float(angle_in), _math_ops))
    raise ValueError(f"split activation {kind.value} has no single phase transfer")


_math_ops = SimpleNamespace(tanh=math.tanh, sin=math.sin)


def _apply_planes(kind, conv, w, x, y, z, ops, eps, norm_eps_denom=False):
    """Forward rule over four component planes.

    Lenient by construction: degenerate points (norm or imaginary norm at or
    below ``eps``) produce the limit conventions instead of NaN. Masks are
    computed from raw values so they act as constants under differentiation.
    When ``norm_eps_denom`` is set, the norm activation divides by ``q + eps``
    (the training-path stabilization) instead of the masked exact division.
    """
    if kind is ActivationKind.SPLIT_RELU:
        return ops.relu(w), ops.relu(x), ops.relu(y), ops.relu(z)
    if kind is ActivationKind.SPLIT_TANH:
        return ops.tanh(w), ops.tanh(x), ops.tanh(y), ops.tanh(z)

    v2 = x * x + y * y + z * z
    q2 = v2 + w * w
    v = ops.sqrt(v2)
    q = ops.sqrt(q2)
    qmask = (ops.value(q) > eps).astype(ops.value(q).dtype)
    q_safe = q + (1.0 - qmask)

    if kind in MAGNITUDE_KINDS:
        if kind is ActivationKind.NORM:
            if norm_eps_denom:
                lam = 1.0 / (q + eps)
            else:
                lam = qmask / q_safe
        elif kind is ActivationKind.MAGNITUDE_TANH:
            lam = ops.tanh(q) * qmask / q_safe
        else:  # cardioid
            if conv is AngleConvention.PSI:
                cos_ang = w * qmask / q_safe
            else:
                q2_safe = q2 + (1.0 - qmask)
                cos_ang = (w * w - v2) * qmask / q2_safe
            lam = 0.5 * (1.0 + cos_ang)
        return lam * w, lam * x, lam * y, lam * z

    # Phase class. The sin-based kinds use the trig-eliminated forms, which
    # stay valid for negative real parts; the rest need the angle itself.
    if kind in (ActivationKind.PHASE_SIN, ActivationKind.SCALED_PHASE_SIN):
        if conv is AngleConvention.PSI:
            s = v * qmask / q_safe
        else:
            q2_safe = q2 + (1.0 - qmask)
            s = 2.0 * v * w * qmask / q2_safe
        g = s if kind is ActivationKind.PHASE_SIN else PI * s
    else:
        ang = ops.atan2(v, w)
        if conv is AngleConvention.THETA:
            ang = 2.0 * ang
        g = phase_transfer(kind, ang, ops)

    cg = ops.cos(g)
    sg = ops.sin(g)
    vmask = (ops.value(v) > eps).astype(ops.value(v).dtype)
    v_safe = v + (1.0 - vmask)
    scale = q * sg * vmask / v_safe
    return q * cg, x * scale, y * scale, z * scale


def activation_with_vjp(kind, conv, w, x, y, z, eps, norm_eps_denom=False):
    """Forward over numpy planes plus a vector-Jacobian closure.

    The forward values come from `_apply_planes` itself, so this fused path
    cannot drift from the reference formulas; only the backward rule is
    hand-derived (and is pinned to central differences by the gradient-check
    suites).
    """
    out = _apply_planes(kind, conv, w, x, y, z, ops=_NP_OPS, eps=eps,
                        norm_eps_denom=norm_eps_denom)

    if kind is ActivationKind.SPLIT_RELU:
        masks = tuple((p > 0).astype(p.dtype) for p in (w, x, y, z))

        def vjp_relu(gw, gx, gy, gz):
            return tuple(g * m for g, m in zip((gw, gx, gy, gz), masks))

        return out, vjp_relu

    if kind is ActivationKind.SPLIT_TANH:
        outs = out

        def vjp_tanh(gw, gx, gy, gz):
            return tuple(g * (1.0 - o * o) for g, o in zip((gw, gx, gy, gz), outs))

        return out, vjp_tanh

    v2 = x * x + y * y + z * z
    q2 = v2 + w * w
    v = np.sqrt(v2)
    q = np.sqrt(q2)
    qmask = (q > eps).astype(q.dtype)
    q_safe = q + (1.0 - qmask)

    if kind in MAGNITUDE_KINDS:
        # out = lam * input with scalar field lam(w, v); the pullback needs
        # lam and its four partials, which factor as coef * component except
        # for the cardioid's real slot.
        if kind is ActivationKind.NORM:
            if norm_eps_denom:
                lam = 1.0 / (q + eps)
                coef = -qmask / (q_safe * (q + eps) ** 2)
            else:
                lam = qmask / q_safe
                coef = -qmask / q_safe ** 3
            dlam_w = coef * w
            dlam_im = coef
        elif kind is ActivationKind.MAGNITUDE_TANH:
            t = np.tanh(q)
            lam = t * qmask / q_safe
            coef = qmask * ((1.0 - t * t) * q - t) / q_safe ** 3
            dlam_w = coef * w
            dlam_im = coef
        elif conv is AngleConvention.PSI:  # cardioid, phase angle
            lam = 0.5 * (1.0 + w * qmask / q_safe)
            dlam_w = 0.5 * v2 * qmask / q_safe ** 3
            dlam_im = -0.5 * w * qmask / q_safe ** 3
        else:  # cardioid, rotation angle: lam = (1 + cos(2 psi)) / 2
            q2_safe = q2 + (1.0 - qmask)
            lam = 0.5 * (1.0 + (w * w - v2) * qmask / q2_safe)
            dlam_w = 2.0 * w * v2 * qmask / q2_safe ** 2
            dlam_im = -2.0 * w * w * qmask / q2_safe ** 2

        def vjp_mag(gw, gx, gy, gz):
            s = gw * w + gx * x + gy * y + gz * z
            return (lam * gw + s * dlam_w,
                    lam * gx + s * dlam_im * x,
                    lam * gy + s * dlam_im * y,
                    lam * gz + s * dlam_im * z)

        return out, vjp_mag

    # Phase class: out = (A, B x, B y, B z) with A = q cos g, B = q sin g / v.
    # gp is dg/dpsi; everything else follows from the chain rule through
    # q(w, v) and psi(w, v).
    vmask = (v > eps).astype(v.dtype)
    v_safe = v + (1.0 - vmask)
    if kind in (ActivationKind.PHASE_SIN, ActivationKind.SCALED_PHASE_SIN):
        k = 1.0 if kind is ActivationKind.PHASE_SIN else PI
        if conv is AngleConvention.PSI:
            g = k * v * qmask / q_safe
            gp = k * w * qmask / q_safe
        else:
            q2_safe = q2 + (1.0 - qmask)
            g = 2.0 * k * v * w * qmask / q2_safe
            gp = 2.0 * k * (w * w - v2) * qmask / q2_safe
    else:
        ang = np.arctan2(v, w)
        m = 1.0 if conv is AngleConvention.PSI else 2.0
        g = phase_transfer(kind, m * ang, _NP_OPS)
        t = np.tanh(m * ang)
        if kind is ActivationKind.PHASE_TANH:
            gp = m * (1.0 - t * t)
        elif kind is ActivationKind.PHASE_TANHSHRINK:
            gp = m * t * t
        elif kind is ActivationKind.SCALED_PHASE_TANH:
            gp = m * (PI / TANH_PI) * (1.0 - t * t)
        else:
            gp = m * (PI / TANHSHRINK_PI) * (t * t)
    cg = np.cos(g)
    sg = np.sin(g)

    def vjp_phase(gw, gx, gy, gz):
        b = q * sg * vmask / v_safe
        da_dw = qmask * (w * cg + v * gp * sg) / q_safe
        da_dv = qmask * (v * cg - w * gp * sg) / q_safe
        db_dw = qmask * vmask * (w * sg / v_safe - gp * cg) / q_safe
        db_dv = qmask * vmask * (w * gp * cg / v_safe - w * w * sg / v_safe ** 2) / q_safe
        t_im = gx * x + gy * y + gz * z
        gin_w = gw * da_dw + t_im * db_dw
        radial = (gw * da_dv + t_im * db_dv) * vmask / v_safe
        return (gin_w,
                gx * b + radial * x,
                gy * b + radial * y,
                gz * b + radial * z)

    return out, vjp_phase


def apply(kind: ActivationKind, conv: AngleConvention, q: Quaternion,
          strict: bool = False, eps: float = EPS64) -> Quaternion:
    """Apply one activation to one quaternion.

    Lenient mode (default) is total on finite inputs; strict mode raises
    :class:`DegenerateQuaternionError` for near-zero inputs to the norm and
    phase-class kinds.
    """
    if strict and kind in _NORM_SENSITIVE and q.norm() <= eps:
        raise DegenerateQuaternionError(
            f"{kind.value} undefined at near-zero quaternion {q}")
    planes = tuple(np.asarray(c, dtype=np.float64) for c in q.components())
    out = _apply_planes(kind, conv, *planes, ops=_NP_OPS, eps=eps)
    return Quaternion(*(float(c) for c in out))


def apply_tensor(kind: ActivationKind, conv: AngleConvention, t: QTensor,
                 strict: bool = False) -> QTensor:
    """Elementwise activation over a quaternion tensor; shape preserved."""
    eps = eps_for(t.dtype)
    if strict and kind in _NORM_SENSITIVE:
        bad = t.norms() <= eps
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise DegenerateQuaternionError(
                f"{kind.value} undefined at near-zero quaternion, index {idx}")
    out = _apply_planes(kind, conv, t.w, t.x, t.y, t.z, ops=_NP_OPS, eps=eps)
    return QTensor(*out, copy=False)
