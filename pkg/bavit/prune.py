"""Token pruning decisions and the layer-weighted token economics.

A token is pruned when its background probability is strictly above theta.
Token counts are layer-weighted (tokens × layers) and fractional counts are
floored, so e.g. 35% sparsity on 1024 tokens × 12 layers keeps 7987.
"""

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from bavit.config import (
    BAVIT_LAYERS,
    BAVIT_TOKENS,
    BG,
    DETECTOR_LAYERS,
    DETECTOR_TOKENS,
    FG,
)
from bavit.errors import GeometryError, ShapeError
from bavit.labeling import PatchGrid, TokenLabelMap
from bavit.postproc import CcaConfig, cca

# absorbs representation error in Ty·(1 - s) before flooring
_FLOOR_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class PruneMask:
    grid: PatchGrid
    keep: np.ndarray

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool).reshape(-1)
        if keep.size != self.grid.tokens:
            raise ShapeError(f"Mask has {keep.size} entries, grid has {self.grid.tokens} tokens")
        keep = keep.copy()
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)

    @property
    def pruned(self) -> int:
        return int(self.keep.size - self.keep.sum())

    @property
    def sparsity(self) -> float:
        return self.pruned / self.keep.size

    def as_label_map(self) -> TokenLabelMap:
        return TokenLabelMap(self.grid, self.keep.astype(np.uint8))

    @classmethod
    def from_label_map(cls, labels: TokenLabelMap) -> "PruneMask":
        return cls(labels.grid, labels.labels == FG)


@dataclass(frozen=True)
class PruneReport:
    sparsity: float
    bavit_tokens: int
    detector_tokens: int
    pruned_detector_tokens: int
    combined_tokens: int
    reduction_pct: float  # signed ratio, (Ty - combined) / Ty

    def to_dict(self) -> Dict:
        return asdict(self)


def mask_from_probs(probs: np.ndarray, grid: PatchGrid, theta: float) -> PruneMask:
    """Prune every token whose P(BG) is strictly greater than theta."""
    if not 0.0 <= theta <= 1.0:
        raise GeometryError(f"theta must lie in [0, 1], got {theta}")
    probs = np.asarray(probs)
    if probs.shape != (grid.tokens, 2):
        raise ShapeError(f"Expected {grid.tokens}×2 probabilities, got {probs.shape}")
    return PruneMask(grid, ~(probs[:, BG] > theta))


def theta_for_sparsity(probs: Iterable[np.ndarray], target_s: float) -> float:
    """(1 - target_s)-quantile of all calibration P(BG) values."""
    if not 0.0 <= target_s < 1.0:
        raise GeometryError(f"target sparsity must lie in [0, 1), got {target_s}")
    values = [np.asarray(p)[..., BG].reshape(-1) for p in probs]
    values = np.concatenate(values) if values else np.empty(0)
    if values.size == 0:
        raise GeometryError("theta_for_sparsity: calibration set is empty")
    return float(np.quantile(values, 1.0 - target_s))


def upscale_labels(src: TokenLabelMap, dst_grid: PatchGrid) -> TokenLabelMap:
    """Nearest-neighbor transfer: dst(r, c) = src(floor(r·Rs/Rd), floor(c·Cs/Cd))."""
    rs, cs = src.grid.rows, src.grid.cols
    rd, cd = dst_grid.rows, dst_grid.cols
    if min(rs, cs, rd, cd) == 0:
        raise GeometryError("upscale_labels: zero-sized grid")
    if rd < rs or cd < cs:
        raise GeometryError(f"upscale_labels: cannot map {rs}x{cs} down to {rd}x{cd}")
    rows = (np.arange(rd) * rs) // rd
    cols = (np.arange(cd) * cs) // cd
    return TokenLabelMap(dst_grid, src.as_grid()[np.ix_(rows, cols)].reshape(-1))


def apply_mask(
    tokens: np.ndarray, mask: PruneMask
) -> Tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """Gather kept tokens (grid order) and return a function scattering results back.

    The restore function places processed tokens at their original positions
    and exact zero vectors at pruned ones.
    """
    if tokens.ndim != 3 or tokens.shape[1] != mask.keep.size:
        raise ShapeError(
            f"apply_mask: tokens {tokens.shape} do not match mask of {mask.keep.size} tokens"
        )
    keep = mask.keep
    kept = tokens[:, keep, :]
    batch, count = tokens.shape[0], tokens.shape[1]

    def restore(processed: np.ndarray) -> np.ndarray:
        if processed.shape[:2] != (batch, int(keep.sum())):
            raise ShapeError(
                f"restore: expected {batch}×{int(keep.sum())} tokens, got {processed.shape[:2]}"
            )
        out = np.zeros((batch, count) + processed.shape[2:], dtype=processed.dtype)
        out[:, keep] = processed
        return out

    return kept, restore


def detector_mask(
    probs: np.ndarray,
    bavit_grid: PatchGrid,
    detector_grid: PatchGrid,
    theta: float,
    cca_config: Optional[CcaConfig] = None,
) -> PruneMask:
    """Threshold at classifier resolution, optionally smooth, upscale to the detector grid."""
    labels = mask_from_probs(probs, bavit_grid, theta).as_label_map()
    if cca_config is not None:
        labels = cca(labels, cca_config)
    return PruneMask.from_label_map(upscale_labels(labels, detector_grid))


def prune_report(
    sparsity: float,
    detector_tokens: int = DETECTOR_TOKENS,
    detector_layers: int = DETECTOR_LAYERS,
    bavit_tokens: int = BAVIT_TOKENS,
    bavit_layers: int = BAVIT_LAYERS,
) -> PruneReport:
    if not 0.0 <= sparsity <= 1.0:
        raise GeometryError(f"sparsity must lie in [0, 1], got {sparsity}")
    ty = detector_tokens * detector_layers
    tb = bavit_tokens * bavit_layers
    if ty <= 0:
        raise GeometryError("detector token count must be positive")
    pruned = math.floor(ty * (1.0 - sparsity) + _FLOOR_EPS)
    combined = pruned + tb
    return PruneReport(
        sparsity=sparsity,
        bavit_tokens=tb,
        detector_tokens=ty,
        pruned_detector_tokens=pruned,
        combined_tokens=combined,
        reduction_pct=(ty - combined) / ty,
    )


def token_reduction(per_image: Sequence[Tuple[int, int, float]]) -> float:
    """Mean over images of (Ty - (Tb + floor(Ty·(1 - s)))) / Ty, as a ratio.

    Ty and Tb are layer-weighted token totals for the detector and classifier.
    """
    if not per_image:
        raise GeometryError("token_reduction: no images")
    total = 0.0
    for ty, tb, s in per_image:
        if not 0.0 <= s <= 1.0:
            raise GeometryError(f"sparsity must lie in [0, 1], got {s}")
        if ty <= 0:
            raise GeometryError("detector token count must be positive")
        kept = math.floor(ty * (1.0 - s) + _FLOOR_EPS)
        total += (ty - (tb + kept)) / ty
    return total / len(per_image)


def reduction_table(
    sparsities: Iterable[float],
    detector_tokens: int = DETECTOR_TOKENS,
    detector_layers: int = DETECTOR_LAYERS,
    bavit_tokens: int = BAVIT_TOKENS,
    bavit_layers: int = BAVIT_LAYERS,
) -> List[PruneReport]:
    return [
        prune_report(s, detector_tokens, detector_layers, bavit_tokens, bavit_layers)
        for s in sparsities
    ]
