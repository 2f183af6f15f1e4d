"""Quaternion neural networks with magnitude- and phase-modifying activations."""

from .quaternion import (
    EPS32,
    EPS64,
    DegenerateQuaternionError,
    Polar,
    Quaternion,
    QTensor,
    angle_theta,
    conj,
    from_polar,
    hamilton,
    imag_norm,
    norm,
    phase_psi,
    to_polar,
)
from .activations import ActivationKind, AngleConvention, apply, apply_tensor, output_phase

__version__ = "0.1.0"

__all__ = [
    "ActivationKind",
    "AngleConvention",
    "DegenerateQuaternionError",
    "EPS32",
    "EPS64",
    "Polar",
    "QTensor",
    "Quaternion",
    "angle_theta",
    "apply",
    "apply_tensor",
    "conj",
    "from_polar",
    "hamilton",
    "imag_norm",
    "norm",
    "output_phase",
    "phase_psi",
    "to_polar",
]
