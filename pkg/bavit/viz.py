from dataclasses import dataclass
from typing import Tuple

import numpy as np

from bavit.errors import GeometryError, ShapeError
from bavit.labeling import PatchGrid, TokenLabelMap
from bavit.prune import PruneMask

Color = Tuple[int, int, int]


@dataclass(frozen=True)
class RenderSpec:
    fg_tint: Color = (220, 40, 40)
    bg_tint: Color = (128, 128, 128)
    alpha: float = 0.45
    fill: Color = (255, 255, 255)
    grid_lines: bool = False
    line_color: Color = (0, 0, 0)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise GeometryError(f"alpha must lie in [0, 1], got {self.alpha}")
        for color in (self.fg_tint, self.bg_tint, self.fill, self.line_color):
            if len(color) != 3 or any(not 0 <= c <= 255 for c in color):
                raise GeometryError(f"Invalid 8-bit RGB color {color}")


def _check_image(image: np.ndarray, grid: PatchGrid):
    if image.shape != (grid.image_height, grid.image_width, 3):
        raise ShapeError(
            f"Image shape {image.shape} does not match grid "
            f"{grid.image_width}x{grid.image_height}"
        )


def _pixel_mask(cells: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Expand a rows×cols boolean grid to an image-sized pixel mask."""
    k = grid.patch_size
    return np.repeat(np.repeat(cells, k, axis=0), k, axis=1)


def render_overlay(image: np.ndarray, labels: TokenLabelMap, spec: RenderSpec = RenderSpec()) -> np.ndarray:
    """Blend each patch with the FG or BG tint."""
    grid = labels.grid
    _check_image(image, grid)
    fg = _pixel_mask(labels.as_grid().astype(bool), grid)
    tint = np.where(fg[..., None], np.array(spec.fg_tint), np.array(spec.bg_tint))
    blended = (1.0 - spec.alpha) * image.astype(np.float64) + spec.alpha * tint
    out = np.clip(np.rint(blended), 0, 255).astype(np.uint8)

    if spec.grid_lines:
        k = grid.patch_size
        out[::k, :, :] = spec.line_color
        out[:, ::k, :] = spec.line_color
    return out


def render_sparse(image: np.ndarray, mask: PruneMask, spec: RenderSpec = RenderSpec()) -> np.ndarray:
    """Copy kept patches verbatim and fill pruned ones with the fill color."""
    _check_image(image, mask.grid)
    pruned = _pixel_mask(~mask.keep.reshape(mask.grid.rows, mask.grid.cols), mask.grid)
    out = np.array(image, dtype=np.uint8, copy=True)
    out[pruned] = spec.fill
    return out


def sparse_filename(stem: str, sparsity: float, ext: str = ".ppm") -> str:
    return f"{stem}_sparse{100.0 * sparsity:.1f}{ext}"
