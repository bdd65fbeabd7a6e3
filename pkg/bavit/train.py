import json
import math
import os
import struct
import time
import zlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from bavit.config import (
    ADAM_BETAS,
    ADAM_EPS,
    BG,
    DEFAULT_CLIP_NORM,
    DEFAULT_GAMMA,
    DEFAULT_LR,
    DEFAULT_STEP_SIZE,
    FG,
)
from bavit.data import Batch
from bavit.errors import CheckpointError, DivergenceError, GeometryError, NumericError
from bavit.labeling import TokenLabelMap
from bavit.loss import accumulative_ce, accumulative_ce_grad, softmax_tokens
from bavit.net import ModelConfig, Params, backward, forward, init_params, param_shapes
from bavit.postproc import CcaConfig
from bavit.postproc import cca as run_cca
from bavit.utils.logging import get_logger

logger = get_logger(__name__)

CHECKPOINT_MAGIC = b"BAVT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float = DEFAULT_LR
    step_size: int = DEFAULT_STEP_SIZE
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if self.base_lr <= 0 or not 0 < self.gamma <= 1 or self.step_size < 1:
            raise GeometryError(f"Invalid learning-rate schedule: {self}")


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    return schedule.base_lr * schedule.gamma ** (epoch // schedule.step_size)


@dataclass
class OptimState:
    step: int
    m: Params
    v: Params
    lr: float = DEFAULT_LR
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    eps: float = ADAM_EPS

    @classmethod
    def zeros_like(cls, params: Params, lr: float = DEFAULT_LR) -> "OptimState":
        return cls(
            step=0,
            m={k: np.zeros_like(v) for k, v in params.items()},
            v={k: np.zeros_like(v) for k, v in params.items()},
            lr=lr,
        )

    def hyperparams(self) -> Dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    lr: float
    seconds: float
    val_accuracy: Optional[float] = None


@dataclass
class TrainReport:
    epochs: List[EpochStats] = field(default_factory=list)

    def to_rows(self, include_timing: bool = False) -> List[Dict]:
        rows = []
        for stats in self.epochs:
            row = {
                "epoch": stats.epoch,
                "loss": stats.loss,
                "accuracy": stats.accuracy,
                "lr": stats.lr,
            }
            if stats.val_accuracy is not None:
                row["val_accuracy"] = stats.val_accuracy
            if include_timing:
                row["seconds"] = stats.seconds
            rows.append(row)
        return rows


def adam_step(
    params: Params, grads: Params, state: OptimState, lr: Optional[float] = None
) -> Tuple[Params, OptimState]:
    """Bias-corrected Adam; returns new params and state, inputs untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"Non-finite gradient in tensor '{name}'")

    lr = state.lr if lr is None else lr
    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1**step, 1.0 - b2**step

    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_params[name] = (p - update).astype(p.dtype, copy=False)
        new_m[name] = m.astype(p.dtype, copy=False)
        new_v[name] = v.astype(p.dtype, copy=False)

    new_state = OptimState(step, new_m, new_v, lr, b1, b2, state.eps)
    return new_params, new_state


def clip_grad_norm(grads: Params, max_norm: float) -> Tuple[Params, float]:
    """Scale all gradients together so their global L2 norm is <= max_norm (0 disables)."""
    total = math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))
    if max_norm <= 0 or total <= max_norm:
        return grads, total
    factor = max_norm / (total + 1e-6)
    return {k: (g * factor).astype(g.dtype, copy=False) for k, g in grads.items()}, total


def train_step(
    params: Params,
    config: ModelConfig,
    batch: Batch,
    state: OptimState,
    lr: float,
    clip_norm: float = DEFAULT_CLIP_NORM,
    class_weights=None,
):
    """One forward/backward/update. Returns (params, state, loss, correct tokens)."""
    logits, cache = forward(params, config, batch.images)
    loss = accumulative_ce(softmax_tokens(logits), batch.labels, class_weights).value
    if not math.isfinite(loss):
        raise NumericError(f"Loss is not finite at step {state.step + 1}")
    correct = int(np.sum(np.argmax(logits, axis=-1) == batch.labels))

    grads = backward(cache, accumulative_ce_grad(logits, batch.labels, class_weights))
    grads, norm = clip_grad_norm(grads, clip_norm)
    logger.debug(f"step {state.step + 1}: loss {loss:.5f} grad-norm {norm:.4f}")
    params, state = adam_step(params, grads, state, lr)
    return params, state, loss, correct


def train(
    config: ModelConfig,
    data: Iterable[Batch],
    epochs: int,
    schedule: LrSchedule = LrSchedule(),
    seed: int = 0,
    clip_norm: float = DEFAULT_CLIP_NORM,
    val_data: Optional[Iterable[Batch]] = None,
    params: Optional[Params] = None,
    state: Optional[OptimState] = None,
    start_epoch: int = 0,
    checkpoint_path=None,
    class_weights=None,
) -> Tuple[Params, TrainReport, OptimState]:
    """Train for `epochs` epochs; batch order is reshuffled per epoch from (seed, epoch).

    When the loss diverges the last good params are written to
    `checkpoint_path` (if given) and DivergenceError is raised.
    """
    batches = list(data)
    if not batches:
        raise GeometryError("train: data stream is empty")
    val_batches = list(val_data) if val_data is not None else None

    if params is None:
        params = init_params(config, seed)
    if state is None:
        state = OptimState.zeros_like(params, schedule.base_lr)

    report = TrainReport()
    for epoch in range(start_epoch, start_epoch + epochs):
        lr = lr_at(schedule, epoch)
        order = np.random.default_rng([seed, epoch]).permutation(len(batches))
        started = time.perf_counter()
        loss_sum, correct, tokens = 0.0, 0, 0

        for index in order:
            batch = batches[index]
            try:
                params, state, loss, hits = train_step(
                    params, config, batch, state, lr, clip_norm, class_weights
                )
            except NumericError as e:
                if checkpoint_path is not None:
                    save_checkpoint(checkpoint_path, params, config, state)
                    logger.error(f"Saved last good checkpoint to {checkpoint_path}")
                raise DivergenceError(str(e), params=params, epoch=epoch, step=state.step) from e
            loss_sum += loss * batch.labels.size
            correct += hits
            tokens += batch.labels.size

        stats = EpochStats(
            epoch=epoch,
            loss=loss_sum / tokens,
            accuracy=correct / tokens,
            lr=lr,
            seconds=time.perf_counter() - started,
        )
        if val_batches:
            stats.val_accuracy = evaluate(params, config, val_batches)
        report.epochs.append(stats)
        val_text = f" val {stats.val_accuracy:.4f}" if stats.val_accuracy is not None else ""
        logger.info(
            f"epoch {epoch}: loss {stats.loss:.5f} acc {stats.accuracy:.4f}{val_text} "
            f"lr {lr:.2e} ({stats.seconds:.2f}s)"
        )

    return params, report, state


def predict_probs(params: Params, config: ModelConfig, images: np.ndarray) -> np.ndarray:
    logits, _ = forward(params, config, images)
    return softmax_tokens(logits)


def predict_labels(params: Params, config: ModelConfig, images: np.ndarray) -> np.ndarray:
    logits, _ = forward(params, config, images)
    return np.argmax(logits, axis=-1)


def evaluate(params: Params, config: ModelConfig, data: Iterable[Batch]) -> float:
    """Micro-averaged token accuracy of argmax predictions, no post-processing."""
    correct, total = 0, 0
    for batch in data:
        predictions = predict_labels(params, config, batch.images)
        correct += int(np.sum(predictions == batch.labels))
        total += batch.labels.size
    if total == 0:
        raise GeometryError("evaluate: data stream is empty")
    return correct / total


def classification_report(
    params: Params, config: ModelConfig, data: Iterable[Batch], cca: Optional[CcaConfig] = None
) -> Dict:
    """Accuracy, per-class precision/recall and confusion counts.

    With a CcaConfig the predicted label grids are post-processed first.
    """
    counts = np.zeros((2, 2), dtype=np.int64)  # [true, predicted]
    for batch in data:
        predictions = predict_labels(params, config, batch.images)
        if cca is not None:
            predictions = np.stack(
                [run_cca(TokenLabelMap(config.grid, row), cca).labels for row in predictions]
            )
        np.add.at(counts, (batch.labels.reshape(-1), predictions.reshape(-1)), 1)

    total = int(counts.sum())
    if total == 0:
        raise GeometryError("classification_report: data stream is empty")

    def ratio(num, den):
        return float(num / den) if den else 0.0

    per_class = {}
    for name, c in (("bg", BG), ("fg", FG)):
        per_class[name] = {
            "precision": ratio(counts[c, c], counts[:, c].sum()),
            "recall": ratio(counts[c, c], counts[c, :].sum()),
            "support": int(counts[c, :].sum()),
        }
    return {
        "accuracy": ratio(np.trace(counts), total),
        "tokens": total,
        "post_processing": cca is not None,
        "classes": per_class,
        "confusion": counts.tolist(),
    }


@dataclass
class Checkpoint:
    params: Params
    config: ModelConfig
    optim_state: Optional[OptimState] = None


def _checkpoint_tensors(params: Params, state: Optional[OptimState]):
    tensors = [(name, params[name]) for name in params]
    if state is not None:
        tensors += [(f"adam.m.{name}", state.m[name]) for name in params]
        tensors += [(f"adam.v.{name}", state.v[name]) for name in params]
    return tensors


def save_checkpoint(path, params: Params, config: ModelConfig, optim_state: Optional[OptimState] = None):
    """Write magic, version, JSON header length, JSON header, float32 LE payload."""
    manifest, chunks, offset = [], [], 0
    for name, tensor in _checkpoint_tensors(params, optim_state):
        data = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(tensor.shape), "dtype": "float32", "offset": offset})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)

    header = {
        "config": config.to_dict(),
        "tensors": manifest,
        "payload_bytes": len(payload),
        "crc32": zlib.crc32(payload),
        "optimizer": None,
    }
    if optim_state is not None:
        header["optimizer"] = {"step": optim_state.step, **optim_state.hyperparams()}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)
    os.replace(tmp_path, path)
    logger.info(f"Saved checkpoint {path} ({len(manifest)} tensors, {len(payload)} bytes)")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        raw = f.read()

    prefix = len(CHECKPOINT_MAGIC) + 8
    if len(raw) < prefix:
        raise CheckpointError(f"{path}: truncated header, expected {prefix} bytes, got {len(raw)}")
    if raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
    version, header_len = struct.unpack("<II", raw[4:prefix])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if len(raw) < prefix + header_len:
        raise CheckpointError(
            f"{path}: truncated header, expected {prefix + header_len} bytes, got {len(raw)}"
        )
    try:
        header = json.loads(raw[prefix : prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header ({e})") from e

    try:
        payload_bytes, crc = int(header["payload_bytes"]), int(header["crc32"])
        manifest, config_dict = header["tensors"], header["config"]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: incomplete header ({e!r})") from None

    payload = raw[prefix + header_len :]
    expected = prefix + header_len + payload_bytes
    if len(raw) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, got {len(raw)}")
    if zlib.crc32(payload) != crc:
        raise CheckpointError(f"{path}: payload checksum mismatch")

    try:
        config = ModelConfig.from_dict(config_dict)
    except (AttributeError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: invalid model config ({e})") from None

    tensors = _read_tensors(path, payload, manifest)
    shapes = param_shapes(config)

    def take(prefix: str) -> Params:
        out = {}
        for name, shape in shapes.items():
            tensor = tensors.get(prefix + name)
            if tensor is None:
                raise CheckpointError(f"{path}: missing tensor '{prefix + name}'")
            if tensor.shape != shape:
                raise CheckpointError(
                    f"{path}: tensor '{prefix + name}' has shape {tensor.shape}, config needs {shape}"
                )
            out[name] = tensor
        return out

    params = take("")
    state = None
    if header.get("optimizer") is not None:
        opt = header["optimizer"]
        m, v = take("adam.m."), take("adam.v.")
        try:
            state = OptimState(
                step=int(opt["step"]),
                m=m,
                v=v,
                lr=float(opt["lr"]),
                beta1=float(opt["beta1"]),
                beta2=float(opt["beta2"]),
                eps=float(opt["eps"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"{path}: incomplete optimizer header ({e!r})") from None
    logger.info(f"Loaded checkpoint {path} (step {state.step if state else 0})")
    return Checkpoint(params, config, state)


def _read_tensors(path, payload: bytes, manifest) -> Params:
    tensors = {}
    try:
        for entry in manifest:
            shape = tuple(int(n) for n in entry["shape"])
            offset = int(entry["offset"])
            if min(shape, default=0) < 0 or offset < 0:
                raise ValueError(f"negative shape or offset in {entry}")
            count = int(np.prod(shape, dtype=np.int64))
            tensors[str(entry["name"])] = (
                np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
                .reshape(shape)
                .astype(np.float32)
            )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: bad tensor manifest ({e})") from None
    return tensors
