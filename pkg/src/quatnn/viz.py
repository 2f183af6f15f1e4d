"""Meshgrid data behind the magnitude, phase and derivative surface plots.

Quaternions are parameterized by (real part, imaginary norm); the imaginary
vector points along a fixed direction, which is an arbitrary choice: the
plotted magnitudes and phases do not depend on it. Output is CSV with
columns re, im, norm, phase; degenerate points are left empty rather than
filled with limit values.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, List, Optional, Sequence, Tuple

import numpy as np

from .activations import (
    QUATERNION_KINDS,
    ActivationKind,
    AngleConvention,
    apply,
)
from .ghr import UnsupportedKindError, analytic_ghr, derivative_grid
from .quaternion import (
    EPS64,
    DegenerateQuaternionError,
    Quaternion,
    phase_psi,
)

SQRT3 = math.sqrt(3.0)
DEFAULT_DIRECTION = (1.0 / SQRT3, 1.0 / SQRT3, 1.0 / SQRT3)

# Axis ranges matching the published value and derivative surfaces.
VALUE_RANGES = ((-1.0, 1.0), (0.0, 1.0))
DERIVATIVE_RANGES = ((-1.5, 1.5), (0.0, 1.5))
DEFAULT_RESOLUTION = 101

Row = Tuple[float, float, Optional[float], Optional[float]]


@dataclass(frozen=True)
class MeshSpec:
    re_range: Tuple[float, float] = VALUE_RANGES[0]
    im_range: Tuple[float, float] = VALUE_RANGES[1]
    resolution: int = DEFAULT_RESOLUTION
    direction: Tuple[float, float, float] = DEFAULT_DIRECTION

    def __post_init__(self):
        if self.im_range[0] < 0:
            raise ValueError(f"imaginary norm range must start at >= 0, got {self.im_range}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be at least 2, got {self.resolution}")
        if math.hypot(*self.direction) <= 0:
            raise ValueError("imaginary direction must be nonzero")

    def re_values(self) -> np.ndarray:
        return np.linspace(self.re_range[0], self.re_range[1], self.resolution)

    def im_values(self) -> np.ndarray:
        return np.linspace(self.im_range[0], self.im_range[1], self.resolution)

    def point(self, re: float, im: float) -> Quaternion:
        d = self.direction
        scale = im / math.hypot(*d)
        return Quaternion(re, scale * d[0], scale * d[1], scale * d[2])


def default_spec(mode: str) -> MeshSpec:
    if mode == "derivative":
        return MeshSpec(re_range=DERIVATIVE_RANGES[0], im_range=DERIVATIVE_RANGES[1])
    return MeshSpec()


def emit_grid(kind: Optional[ActivationKind], conv: AngleConvention,
              spec: Optional[MeshSpec] = None, mode: str = "value") -> List[Row]:
    """Evaluate one surface over the mesh, y-major (imaginary norm outer).

    ``kind=None`` emits the raw meshgrid itself (the no-activation figure).
    Value mode rows carry the output magnitude and the output phase;
    derivative mode carries the derivative magnitude and the phase of the
    derivative quaternion. Degenerate entries are None.
    """
    if mode not in ("value", "derivative"):
        raise ValueError(f"mode must be value or derivative, got {mode!r}")
    if spec is None:
        spec = default_spec(mode)

    if mode == "derivative":
        if kind is None or kind not in QUATERNION_KINDS:
            name = "identity" if kind is None else kind.value
            raise UnsupportedKindError(f"derivative grids need a quaternion kind, got {name}")
        if conv is not AngleConvention.PSI:
            raise UnsupportedKindError("derivative grids cover the psi convention only")
        rows: List[Row] = []
        for re, im, mag in derivative_grid(kind, spec):
            phase = None
            if mag is not None:
                d = analytic_ghr(kind, spec.point(re, im)).value
                phase = phase_psi(d) if d.norm() > EPS64 else None
            rows.append((re, im, mag, phase))
        return rows

    rows = []
    for im in spec.im_values():
        for re in spec.re_values():
            z = spec.point(float(re), float(im))
            try:
                out = z if kind is None else apply(kind, conv, z, strict=True)
            except DegenerateQuaternionError:
                rows.append((float(re), float(im), None, None))
                continue
            n = out.norm()
            phase = phase_psi(out) if n > EPS64 else None
            rows.append((float(re), float(im), n, phase))
    return rows


def write_csv(rows: Sequence[Row], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["re", "im", "norm", "phase"])
    for re, im, n, phase in rows:
        writer.writerow([
            repr(re), repr(im),
            "" if n is None else repr(n),
            "" if phase is None else repr(phase),
        ])
