"""CLS-free ViT token classifier with a hand-written backward pass.

Every token gets its own two-class (BG, FG) logit pair; there is no class
token and the positional table has exactly one row per patch. Parameters are
a flat ``{name: ndarray}`` mapping whose names and shapes come from
:func:`param_shapes`.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.special import erf
from scipy.stats import truncnorm

from bavit.config import (
    DEFAULT_DEPTH,
    DEFAULT_EMBED_DIM,
    DEFAULT_HEADS,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_MLP_RATIO,
    DEFAULT_PATCH_SIZE,
    INIT_STD,
    NORM_EPS,
    NUM_CLASSES,
)
from bavit.errors import GeometryError, ShapeError
from bavit.labeling import PatchGrid
from bavit.utils.logging import get_logger

logger = get_logger(__name__)

Params = Dict[str, np.ndarray]

# per-element costs used by the FLOP estimate
NORM_FLOPS = 8  # mean, center, square, mean, rsqrt, scale, affine
SOFTMAX_FLOPS = 5  # max, subtract, exp, sum, divide
GELU_FLOPS = 8


@dataclass(frozen=True)
class ModelConfig:
    image_width: int = DEFAULT_IMAGE_SIZE
    image_height: int = DEFAULT_IMAGE_SIZE
    patch_size: int = DEFAULT_PATCH_SIZE
    embed_dim: int = DEFAULT_EMBED_DIM
    depth: int = DEFAULT_DEPTH
    heads: int = DEFAULT_HEADS
    mlp_ratio: int = DEFAULT_MLP_RATIO
    classes: int = NUM_CLASSES

    def __post_init__(self):
        PatchGrid(self.image_width, self.image_height, self.patch_size)
        if self.embed_dim <= 0 or self.heads <= 0 or self.embed_dim % self.heads:
            raise GeometryError(
                f"embed_dim {self.embed_dim} must be a positive multiple of heads {self.heads}"
            )
        if self.depth < 0 or self.mlp_ratio <= 0:
            raise GeometryError(f"Invalid depth/mlp_ratio: {self.depth}/{self.mlp_ratio}")
        if self.classes != NUM_CLASSES:
            raise GeometryError(f"Token classifier is binary, got classes={self.classes}")

    @classmethod
    def square(cls, image_size: int, **kwargs) -> "ModelConfig":
        return cls(image_width=image_size, image_height=image_size, **kwargs)

    @classmethod
    def from_dict(cls, data: Dict) -> "ModelConfig":
        return cls(**{k: int(v) for k, v in data.items()})

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.image_width, self.image_height, self.patch_size)

    @property
    def tokens(self) -> int:
        return self.grid.tokens

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @property
    def hidden_dim(self) -> int:
        return self.embed_dim * self.mlp_ratio

    @property
    def patch_dim(self) -> int:
        return 3 * self.patch_size * self.patch_size


def param_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    S, R = config.embed_dim, config.hidden_dim
    shapes = {
        "patch_embed.weight": (config.patch_dim, S),
        "patch_embed.bias": (S,),
        "pos_embed": (config.tokens, S),
    }
    for i in range(config.depth):
        p = f"blocks.{i}"
        shapes.update(
            {
                f"{p}.norm1.scale": (S,),
                f"{p}.norm1.shift": (S,),
                f"{p}.attn.qkv.weight": (S, 3 * S),
                f"{p}.attn.qkv.bias": (3 * S,),
                f"{p}.attn.proj.weight": (S, S),
                f"{p}.attn.proj.bias": (S,),
                f"{p}.norm2.scale": (S,),
                f"{p}.norm2.shift": (S,),
                f"{p}.mlp.fc1.weight": (S, R),
                f"{p}.mlp.fc1.bias": (R,),
                f"{p}.mlp.fc2.weight": (R, S),
                f"{p}.mlp.fc2.bias": (S,),
            }
        )
    shapes.update(
        {
            "norm.scale": (S,),
            "norm.shift": (S,),
            "head.weight": (S, config.classes),
            "head.bias": (config.classes,),
        }
    )
    return shapes


def init_params(config: ModelConfig, seed: int, dtype=np.float32) -> Params:
    """Truncated-normal (±2σ, σ=0.02) weights and positions, zero biases, unit norm scales."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".weight") or name == "pos_embed":
            values = truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=shape, random_state=rng)
        elif name.endswith(".scale"):
            values = np.ones(shape)
        else:
            values = np.zeros(shape)
        params[name] = np.asarray(values, dtype=dtype)
    return params


def count_params(config: ModelConfig) -> int:
    S, R, C = config.embed_dim, config.hidden_dim, config.classes
    per_layer = (2 * S) + (S * 3 * S + 3 * S) + (S * S + S) + (2 * S) + (S * R + R) + (R * S + S)
    return (
        config.patch_dim * S
        + S
        + config.tokens * S
        + config.depth * per_layer
        + 2 * S
        + S * C
        + C
    )


def flop_breakdown(config: ModelConfig) -> Dict[str, int]:
    """Forward FLOPs per image by stage, 2 FLOPs per multiply-accumulate.

    Bias and residual additions are not counted. The "head" stage covers the
    final norm and the classifier.
    """
    M, S, R, L = config.tokens, config.embed_dim, config.hidden_dim, config.depth
    return {
        "patch_embed": 2 * M * config.patch_dim * S,
        "qkv": L * 2 * M * S * 3 * S,
        "attn_scores": L * 2 * M * M * S,
        "attn_values": L * 2 * M * M * S,
        "attn_proj": L * 2 * M * S * S,
        "mlp": L * 2 * 2 * M * S * R,
        "norm": L * 2 * M * S * NORM_FLOPS,
        "softmax": L * config.heads * M * M * SOFTMAX_FLOPS,
        "gelu": L * M * R * GELU_FLOPS,
        "head": 2 * M * S * config.classes + M * S * NORM_FLOPS,
    }


def estimate_flops(config: ModelConfig) -> int:
    return sum(flop_breakdown(config).values())


def validate_params(params: Params, config: ModelConfig):
    expected = param_shapes(config)
    missing = [name for name in expected if name not in params]
    if missing:
        raise ShapeError(f"params: missing tensors {missing[:3]}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """B×H×W×3 -> B×M×(k·k·3), patches row-major, pixels (row, col, channel) inside."""
    B, H, W, C = images.shape
    k = patch_size
    x = images.reshape(B, H // k, k, W // k, k, C).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(B, (H // k) * (W // k), k * k * C)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def layer_norm(x, scale, shift):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + NORM_EPS)
    xhat = xc * rstd
    return xhat * scale + shift, (xhat, rstd)


def layer_norm_backward(dy, cache, scale):
    xhat, rstd = cache
    d_scale = (dy * xhat).sum(axis=(0, 1))
    d_shift = dy.sum(axis=(0, 1))
    dxhat = dy * scale
    dx = rstd * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, d_scale, d_shift


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x):
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return cdf + x * pdf


def _linear_grads(x, dy):
    """Weight and bias gradients of y = x @ W + b over all leading axes."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return x2.T @ dy2, dy2.sum(axis=0)


@dataclass
class ForwardCache:
    config: ModelConfig
    params: Params
    patches: np.ndarray
    blocks: List[Dict] = field(default_factory=list)
    final_norm: Tuple = ()
    features: np.ndarray = None
    logits_shape: Tuple[int, ...] = ()


def _attention(h, params, prefix, config):
    B, M, S = h.shape
    H, D = config.heads, config.head_dim
    qkv = h @ params[f"{prefix}.qkv.weight"] + params[f"{prefix}.qkv.bias"]
    q, k, v = qkv.reshape(B, M, 3, H, D).transpose(2, 0, 3, 1, 4)
    scale = 1.0 / math.sqrt(D)
    attn = softmax((q @ k.transpose(0, 1, 3, 2)) * scale)
    ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, M, S)
    out = ctx @ params[f"{prefix}.proj.weight"] + params[f"{prefix}.proj.bias"]
    return out, {"h": h, "q": q, "k": k, "v": v, "attn": attn, "ctx": ctx, "scale": scale}


def _attention_backward(d_out, cache, params, prefix, grads, config):
    B, M, S = d_out.shape
    H, D = config.heads, config.head_dim
    q, k, v, attn = cache["q"], cache["k"], cache["v"], cache["attn"]

    grads[f"{prefix}.proj.weight"], grads[f"{prefix}.proj.bias"] = _linear_grads(
        cache["ctx"], d_out
    )
    d_ctx = (d_out @ params[f"{prefix}.proj.weight"].T).reshape(B, M, H, D).transpose(0, 2, 1, 3)

    d_attn = d_ctx @ v.transpose(0, 1, 3, 2)
    dv = attn.transpose(0, 1, 3, 2) @ d_ctx
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True)) * cache["scale"]
    dq = d_scores @ k
    dk = d_scores.transpose(0, 1, 3, 2) @ q

    d_qkv = np.stack([dq, dk, dv]).transpose(1, 3, 0, 2, 4).reshape(B, M, 3 * S)
    grads[f"{prefix}.qkv.weight"], grads[f"{prefix}.qkv.bias"] = _linear_grads(cache["h"], d_qkv)
    return d_qkv @ params[f"{prefix}.qkv.weight"].T


def forward(params: Params, config: ModelConfig, images: np.ndarray):
    """Return (B×M×2 logits, ForwardCache)."""
    if images.ndim != 4 or images.shape[1:] != (config.image_height, config.image_width, 3):
        raise ShapeError(
            f"patchify: expected B×{config.image_height}×{config.image_width}×3 images, "
            f"got {images.shape}"
        )
    validate_params(params, config)

    patches = patchify(images, config.patch_size).astype(params["pos_embed"].dtype, copy=False)
    x = patches @ params["patch_embed.weight"] + params["patch_embed.bias"] + params["pos_embed"]
    cache = ForwardCache(config=config, params=params, patches=patches)

    for i in range(config.depth):
        p = f"blocks.{i}"
        h1, ln1 = layer_norm(x, params[f"{p}.norm1.scale"], params[f"{p}.norm1.shift"])
        attn_out, attn_cache = _attention(h1, params, f"{p}.attn", config)
        x = x + attn_out

        h2, ln2 = layer_norm(x, params[f"{p}.norm2.scale"], params[f"{p}.norm2.shift"])
        u = h2 @ params[f"{p}.mlp.fc1.weight"] + params[f"{p}.mlp.fc1.bias"]
        a = gelu(u)
        x = x + a @ params[f"{p}.mlp.fc2.weight"] + params[f"{p}.mlp.fc2.bias"]
        cache.blocks.append({"ln1": ln1, "attn": attn_cache, "ln2": ln2, "h2": h2, "u": u, "a": a})

    features, cache.final_norm = layer_norm(x, params["norm.scale"], params["norm.shift"])
    logits = features @ params["head.weight"] + params["head.bias"]
    cache.features = features
    cache.logits_shape = logits.shape
    return logits, cache


def backward(cache: ForwardCache, d_logits: np.ndarray) -> Params:
    """Gradients of every parameter given dLoss/dlogits."""
    if d_logits.shape != cache.logits_shape:
        raise ShapeError(
            f"backward: d_logits shape {d_logits.shape} does not match forward "
            f"logits {cache.logits_shape}"
        )
    config, params = cache.config, cache.params
    if len(cache.blocks) != config.depth:
        raise ShapeError(f"backward: cache holds {len(cache.blocks)} blocks, config {config.depth}")
    d_logits = d_logits.astype(cache.features.dtype, copy=False)
    grads: Params = {}

    grads["head.weight"], grads["head.bias"] = _linear_grads(cache.features, d_logits)
    dx, grads["norm.scale"], grads["norm.shift"] = layer_norm_backward(
        d_logits @ params["head.weight"].T, cache.final_norm, params["norm.scale"]
    )

    for i in reversed(range(config.depth)):
        p = f"blocks.{i}"
        b = cache.blocks[i]
        grads[f"{p}.mlp.fc2.weight"], grads[f"{p}.mlp.fc2.bias"] = _linear_grads(b["a"], dx)
        du = (dx @ params[f"{p}.mlp.fc2.weight"].T) * gelu_grad(b["u"])
        grads[f"{p}.mlp.fc1.weight"], grads[f"{p}.mlp.fc1.bias"] = _linear_grads(b["h2"], du)
        d_h2 = du @ params[f"{p}.mlp.fc1.weight"].T
        d_x2, grads[f"{p}.norm2.scale"], grads[f"{p}.norm2.shift"] = layer_norm_backward(
            d_h2, b["ln2"], params[f"{p}.norm2.scale"]
        )
        dx = dx + d_x2

        d_h1 = _attention_backward(dx, b["attn"], params, f"{p}.attn", grads, config)
        d_x1, grads[f"{p}.norm1.scale"], grads[f"{p}.norm1.shift"] = layer_norm_backward(
            d_h1, b["ln1"], params[f"{p}.norm1.scale"]
        )
        dx = dx + d_x1

    grads["pos_embed"] = dx.sum(axis=0)
    grads["patch_embed.weight"], grads["patch_embed.bias"] = _linear_grads(cache.patches, dx)

    return {name: grads[name] for name in param_shapes(config)}
