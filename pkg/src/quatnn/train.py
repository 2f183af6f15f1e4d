"""Training and evaluation loop.

Seeded minibatch shuffling, softmax cross-entropy, optional global
gradient-norm clipping, Adam with an epoch-granular exponential learning
rate schedule, per-epoch test accuracy. Single-threaded and deterministic:
the same config and seed produce the same metrics, row for row.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .activations import ActivationKind, AngleConvention
from .data import DatasetHandle, encode_quaternion, load_cifar10, load_qimg, packed_input
from .models import Model, build_model, save_checkpoint

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.99
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: str = "qvgg-s"
    activation: str = "phase-sin"
    angle: str = "psi"
    dataset: str = "cifar10"
    data_dir: str = "data"
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    lr_final: float = 1e-4
    clip_norm: Optional[float] = None
    seed: int = 0
    runs: int = 1
    dtype: str = "float32"
    limit_train: Optional[int] = None
    limit_test: Optional[int] = None
    out_dir: str = "runs"
    eval_batch_size: int = 256
    timer: Callable[[], float] = time.perf_counter

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_final > self.lr:
            raise ValueError(f"final lr {self.lr_final} must not exceed initial {self.lr}")

    def np_dtype(self):
        return np.dtype(self.dtype)


class Adam:
    """Adam over the model parameters; beta1=0.9, beta2=0.99, eps=1e-8."""

    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - ADAM_BETA1 ** self.t
        b2c = 1.0 - ADAM_BETA2 ** self.t
        for i, p in enumerate(self.params):
            g = grads[p.name]
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * (g * g)
            m_hat = self.m[i] / b1c
            v_hat = self.v[i] / b2c
            p.value -= (self.lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(
                p.value.dtype, copy=False)


def epoch_order(rng: np.random.Generator, n: int) -> np.ndarray:
    """Seeded shuffle: a permutation of all n sample indices."""
    return rng.permutation(n)


def lr_schedule(lr_initial: float, lr_final: float, epochs: int, epoch: int) -> float:
    """Learning rate used during 1-indexed `epoch`: the per-epoch multiplier
    r = (final/initial)^(1/epochs) applied entering each epoch, so the final
    epoch runs exactly at lr_final."""
    r = (lr_final / lr_initial) ** (1.0 / epochs)
    return lr_initial * r ** epoch


def clip_gradients(grads: Dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients so the global norm is at most clip_norm.
    Returns the pre-clip global norm."""
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if total > clip_norm and total > 0:
        scale = clip_norm / total
        for name in grads:
            grads[name] = grads[name] * np.asarray(scale, dtype=grads[name].dtype)
    return total


def evaluate(model: Model, images: np.ndarray, labels: np.ndarray,
             batch_size: int = 256) -> float:
    """Top-1 accuracy in percent, rounded to 3 decimals."""
    hits = 0
    for start in range(0, images.shape[0], batch_size):
        logits = model.logits(images[start:start + batch_size])
        hits += int((logits.argmax(axis=1) == labels[start:start + batch_size]).sum())
    return round(100.0 * hits / images.shape[0], 3)


@dataclass
class EpochMetrics:
    run: int
    epoch: int
    train_loss: float
    train_acc: float
    test_acc: float
    lr: float
    wall_seconds: float


@dataclass
class TrainResult:
    metrics: List[EpochMetrics]
    checkpoint_path: Optional[str]
    metrics_path: Optional[str]
    model: Model


def _load_data(config: TrainConfig) -> Tuple[DatasetHandle, DatasetHandle]:
    if config.dataset == "cifar10":
        return load_cifar10(config.data_dir)
    if config.dataset == "qimg":
        train = load_qimg(os.path.join(config.data_dir, "train.qimg"), "train")
        test = load_qimg(os.path.join(config.data_dir, "test.qimg"), "test")
        return train, test
    raise ValueError(f"unknown dataset {config.dataset!r} (expected cifar10 or qimg)")


def _metrics_header(config: TrainConfig) -> List[str]:
    return [
        "# quatnn training metrics",
        f"# model={config.model} activation={config.activation} angle={config.angle}"
        f" dataset={config.dataset} dtype={config.dtype}",
        f"# epochs={config.epochs} batch_size={config.batch_size}"
        f" lr={config.lr!r} lr_final={config.lr_final!r}"
        f" clip_norm={config.clip_norm!r} seed={config.seed} runs={config.runs}",
        f"# adam_beta1={ADAM_BETA1} adam_beta2={ADAM_BETA2} adam_eps={ADAM_EPS}",
        "run,epoch,train_loss,train_acc,test_acc,lr,wall_seconds",
    ]


def format_row(m: EpochMetrics) -> str:
    return (f"{m.run},{m.epoch},{m.train_loss:.6f},{m.train_acc:.3f},"
            f"{m.test_acc:.3f},{m.lr:.10g},{m.wall_seconds:.3f}")


def train(config: TrainConfig,
          data: Optional[Tuple[DatasetHandle, DatasetHandle]] = None,
          write_outputs: bool = True) -> TrainResult:
    train_set, test_set = data if data is not None else _load_data(config)
    if config.limit_train:
        train_set = train_set.subset(config.limit_train)
    if config.limit_test:
        test_set = test_set.subset(config.limit_test)

    dtype = config.np_dtype()
    x_train = packed_input(encode_quaternion(train_set.images, dtype))
    y_train = train_set.labels.astype(np.int64)
    x_test = packed_input(encode_quaternion(test_set.images, dtype))
    y_test = test_set.labels.astype(np.int64)

    kind = ActivationKind.from_name(config.activation)
    angle = AngleConvention.from_name(config.angle)

    all_metrics: List[EpochMetrics] = []
    model: Optional[Model] = None
    checkpoint_path = metrics_path = None

    for run in range(1, config.runs + 1):
        run_seed = config.seed + run - 1
        rng = np.random.default_rng(run_seed)
        model = build_model(config.model, kind, angle, dtype=dtype, rng=rng)
        optimizer = Adam(model.parameters(), config.lr)
        n = x_train.shape[0]

        for epoch in range(1, config.epochs + 1):
            tic = config.timer()
            optimizer.lr = lr_schedule(config.lr, config.lr_final, config.epochs, epoch)
            order = epoch_order(rng, n)
            loss_sum = 0.0
            hit_sum = 0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                xb = x_train[idx]
                yb = y_train[idx]
                with ad.Tape() as tape:
                    logits = model.forward(tape, tape.var(xb))
                    loss = ad.softmax_cross_entropy(logits, yb)
                    loss_value = float(loss.value)
                    if not math.isfinite(loss_value):
                        raise TrainingDivergedError(
                            f"non-finite loss {loss_value} at run {run} epoch {epoch}"
                            f" batch {start // config.batch_size}")
                    grad_map = tape.backward(loss)
                    grads = {v.name: g for v, g in grad_map.items()}
                    hit_sum += int((logits.value.argmax(axis=1) == yb).sum())
                if config.clip_norm is not None:
                    clip_gradients(grads, config.clip_norm)
                optimizer.step(grads)
                loss_sum += loss_value * len(idx)
            test_acc = evaluate(model, x_test, y_test, config.eval_batch_size)
            all_metrics.append(EpochMetrics(
                run=run,
                epoch=epoch,
                train_loss=loss_sum / n,
                train_acc=round(100.0 * hit_sum / n, 3),
                test_acc=test_acc,
                lr=optimizer.lr,
                wall_seconds=config.timer() - tic,
            ))

        if write_outputs:
            os.makedirs(config.out_dir, exist_ok=True)
            tag = f"{config.model}-{config.activation}-{config.angle}"
            checkpoint_path = os.path.join(config.out_dir, f"{tag}-run{run}.qnn")
            save_checkpoint(model, checkpoint_path)

    if write_outputs:
        os.makedirs(config.out_dir, exist_ok=True)
        tag = f"{config.model}-{config.activation}-{config.angle}"
        metrics_path = os.path.join(config.out_dir, f"{tag}-metrics.csv")
        with open(metrics_path, "w") as fh:
            for line in _metrics_header(config):
                fh.write(line + "\n")
            for m in all_metrics:
                fh.write(format_row(m) + "\n")

    return TrainResult(all_metrics, checkpoint_path, metrics_path, model)
