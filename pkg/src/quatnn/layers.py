"""Quaternion network layers on packed component-plane variables.

Activations travel through the network as a single real tensor
[B, 4C, H, W] (or [B, 4N] after flattening) whose channel axis holds the
four component groups in w, x, y, z order. Hamilton products are realized
as real block matrices over those groups, so a quaternion convolution is
one real convolution with a structured kernel and a quaternion linear
layer is one real matmul with a structured weight.

Operand order differs between the two layer types on purpose: convolution
multiplies input (x) kernel, the linear layer multiplies weight (x) input.
"""
from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .activations import ActivationKind, AngleConvention


class Parameter:
    """Named, mutable weight array. Optimizers update `value` in place."""

    __slots__ = ("name", "value")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.value.shape})"


class _Binder:
    """Wraps parameters as tape variables once per forward pass."""

    def __init__(self, tape: ad.Tape, train: bool):
        self.tape = tape
        self.train = train
        self._vars: Dict[int, ad.Var] = {}

    def __call__(self, p: Parameter) -> ad.Var:
        key = id(p)
        if key not in self._vars:
            self._vars[key] = self.tape.var(p.value, requires_grad=True, name=p.name)
        return self._vars[key]


def quaternion_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    """Four independent uniform planes with variance 1 / (4 * fan_in quaternions)."""
    bound = math.sqrt(3.0 / (4.0 * fan_in))
    return rng.uniform(-bound, bound, size=(4,) + tuple(shape)).astype(dtype)


class QConv2d:
    """Quaternion 2D convolution, stride 1, zero same-padding, odd kernel.

    Per pixel the product is input (x) kernel, summed over input channels,
    plus a quaternion bias per output channel.
    """

    def __init__(self, name: str, in_channels: int, out_channels: int,
                 kernel_size: int = 3, dtype=np.float64,
                 rng: Optional[np.random.Generator] = None):
        if kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {kernel_size}")
        if min(in_channels, out_channels) < 1:
            raise ValueError("channel counts must be at least 1")
        rng = rng if rng is not None else np.random.default_rng()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size * kernel_size
        self.kernel = Parameter(f"{name}.kernel", quaternion_uniform(
            rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros((4, out_channels), dtype=dtype))

    def parameters(self) -> List[Parameter]:
        return [self.kernel, self.bias]

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        kq = bind(self.kernel)
        kw, kx, ky, kz = (kq.narrow(0, i, 1).reshape(kq.shape[1:]) for i in range(4))
        # input-left Hamilton block: rows are output components, column
        # groups are input components
        rows = [
            ad.concat([kw, -kx, -ky, -kz], axis=1),
            ad.concat([kx, kw, kz, -ky], axis=1),
            ad.concat([ky, -kz, kw, kx], axis=1),
            ad.concat([kz, ky, -kx, kw], axis=1),
        ]
        block = ad.concat(rows, axis=0)
        bias = bind(self.bias).reshape(1, 4 * self.out_channels, 1, 1)
        return ad.conv2d(x, block) + bias


class QLinear:
    """Quaternion linear layer: out_i = sum_j weight_ij (x) in_j + bias_i."""

    def __init__(self, name: str, in_features: int, out_features: int,
                 dtype=np.float64, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(f"{name}.weight", quaternion_uniform(
            rng, (out_features, in_features), in_features, dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros((4, out_features), dtype=dtype))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        if x.shape[1] != 4 * self.in_features:
            raise ValueError(
                f"expected {4 * self.in_features} packed features, got {x.shape[1]}")
        wq = bind(self.weight)
        ww, wx, wy, wz = (wq.narrow(0, i, 1).reshape(wq.shape[1:]) for i in range(4))
        # weight-left Hamilton block
        rows = [
            ad.concat([ww, -wx, -wy, -wz], axis=1),
            ad.concat([wx, ww, -wz, wy], axis=1),
            ad.concat([wy, wz, ww, -wx], axis=1),
            ad.concat([wz, -wy, wx, ww], axis=1),
        ]
        block = ad.concat(rows, axis=0)  # [4m, 4n]
        bq = bind(self.bias)
        bias = bq.reshape(4 * self.out_features)
        return x @ block.transpose() + bias


class QAvgPool2d:
    """Componentwise mean over non-overlapping windows (2x2 in the models)."""

    def __init__(self, window: int = 2):
        self.window = window

    def parameters(self) -> List[Parameter]:
        return []

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        return ad.avgpool2d(x, self.window)


class QActivation:
    """Fused quaternion activation; the norm kind runs with the stabilized
    denominator on this (training) path."""

    def __init__(self, kind: ActivationKind, conv: AngleConvention):
        self.kind = kind
        self.conv = conv

    def parameters(self) -> List[Parameter]:
        return []

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        return ad.quaternion_activation(x, self.kind, self.conv, norm_eps_denom=True)


class Flatten:
    def parameters(self) -> List[Parameter]:
        return []

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        return x.reshape(x.shape[0], int(np.prod(x.shape[1:])))


class RealLinear:
    """Plain real linear head; also the learnable map out of quaternion space."""

    def __init__(self, name: str, in_features: int, out_features: int,
                 dtype=np.float64, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng()
        bound = math.sqrt(3.0 / in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(f"{name}.weight", rng.uniform(
            -bound, bound, size=(out_features, in_features)).astype(dtype))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_features, dtype=dtype))

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]

    def forward(self, x: ad.Var, bind: _Binder) -> ad.Var:
        return x @ bind(self.weight).transpose() + bind(self.bias)
