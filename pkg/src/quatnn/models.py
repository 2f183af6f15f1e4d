"""VGG-style quaternion classifiers and their flat binary checkpoints.

Three stacks over 32x32 single-quaternion-channel input:

* qvgg-s: six 3x3 quaternion convolutions (16,16 / 32,32 / 64,64), each
  followed by an activation, a 2x2 quaternion average pool after each pair,
  then one real linear layer from the 4096 flattened reals to 10 logits.
* qvgg11 / qvgg16: the standard VGG conv stacks with quaternion channel
  counts at one quarter of the usual real counts, quaternion average
  pooling, and the same single real linear head.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import autodiff as ad
from .activations import ActivationKind, AngleConvention
from .layers import (
    Flatten,
    Parameter,
    QActivation,
    QAvgPool2d,
    QConv2d,
    QLinear,
    RealLinear,
    _Binder,
)

INPUT_SIZE = 32
NUM_CLASSES = 10

# "P" pools; integers are quaternion channel counts of 3x3 convolutions.
_STACKS: Dict[str, Tuple[Union[int, str], ...]] = {
    "qvgg-s": (16, 16, "P", 32, 32, "P", 64, 64, "P"),
    "qvgg11": (16, "P", 32, "P", 64, 64, "P", 128, 128, "P", 128, 128, "P"),
    "qvgg16": (16, 16, "P", 32, 32, "P", 64, 64, 64, "P",
               128, 128, 128, "P", 128, 128, 128, "P"),
}


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    stack: Tuple[Union[int, str], ...]
    classifier_in: int
    classifier_out: int = NUM_CLASSES

    @classmethod
    def named(cls, architecture: str) -> "ModelConfig":
        if architecture not in _STACKS:
            known = ", ".join(sorted(_STACKS))
            raise ValueError(f"unknown architecture {architecture!r}; expected one of {known}")
        stack = _STACKS[architecture]
        size = INPUT_SIZE
        channels = 1
        for item in stack:
            if item == "P":
                size //= 2
            else:
                channels = item
        return cls(architecture=architecture, stack=stack,
                   classifier_in=4 * channels * size * size)


class Model:
    def __init__(self, config: ModelConfig, activation: ActivationKind,
                 angle: AngleConvention, layers: Sequence, dtype):
        self.config = config
        self.activation = activation
        self.angle = angle
        self.layers = list(layers)
        self.dtype = np.dtype(dtype)

    def parameters(self) -> List[Parameter]:
        out: List[Parameter] = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def forward(self, tape: ad.Tape, x: ad.Var) -> ad.Var:
        bind = _Binder(tape, train=True)
        for layer in self.layers:
            x = layer.forward(x, bind)
        return x

    def logits(self, batch: np.ndarray) -> np.ndarray:
        """Forward pass outside of training; input is packed [B, 4, H, W]."""
        with ad.Tape() as tape:
            out = self.forward(tape, tape.var(batch.astype(self.dtype, copy=False)))
            return out.value


def build_model(config: Union[str, ModelConfig], activation: ActivationKind,
                angle: AngleConvention = AngleConvention.PSI, dtype=np.float64,
                rng: Optional[np.random.Generator] = None) -> Model:
    if isinstance(config, str):
        config = ModelConfig.named(config)
    rng = rng if rng is not None else np.random.default_rng()
    layers: List = []
    in_channels = 1
    conv_index = 0
    for item in config.stack:
        if item == "P":
            layers.append(QAvgPool2d(2))
            continue
        conv_index += 1
        layers.append(QConv2d(f"conv{conv_index}", in_channels, item,
                              kernel_size=3, dtype=dtype, rng=rng))
        layers.append(QActivation(activation, angle))
        in_channels = item
    layers.append(Flatten())
    layers.append(RealLinear("fc", config.classifier_in, config.classifier_out,
                             dtype=dtype, rng=rng))
    return Model(config, activation, angle, layers, dtype)


# ---- checkpoint format ----
#
# magic "QNN1", u32 parameter count, then per parameter:
#   u32 name length, name bytes (utf-8), u32 rank, rank x u32 extents,
#   little-endian float32 data in C order. Quaternion tensors store their
#   four planes as a leading extent of 4, in w, x, y, z order.

_MAGIC = b"QNN1"


def save_checkpoint(model: Model, path: str) -> None:
    params = model.parameters()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<I", p.value.ndim))
            fh.write(struct.pack(f"<{p.value.ndim}I", *p.value.shape))
            fh.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(model: Model, path: str) -> None:
    """Load weights saved by `save_checkpoint` into a structurally equal model."""
    by_name = {p.name: p for p in model.parameters()}
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic")
        (count,) = struct.unpack("<I", fh.read(4))
        seen = set()
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise ValueError(f"{path}: truncated data for parameter {name!r}")
            if name not in by_name:
                raise ValueError(f"{path}: unexpected parameter {name!r}")
            target = by_name[name]
            if tuple(shape) != target.value.shape:
                raise ValueError(
                    f"{path}: {name!r} has extents {shape}, model expects {target.value.shape}")
            data = np.frombuffer(raw, dtype="<f4").reshape(shape)
            target.value[...] = data.astype(target.value.dtype)
            seen.add(name)
    missing = set(by_name) - seen
    if missing:
        raise ValueError(f"{path}: checkpoint is missing parameters {sorted(missing)}")
