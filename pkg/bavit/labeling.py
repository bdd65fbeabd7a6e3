"""Per-patch FG/BG labels from bounding boxes and segmentation masks.

Rectangles and patches are half-open integer pixel ranges, so every area in
here is an exact pixel count. Labels are stored row-major over the patch grid,
0 = background, 1 = foreground.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from bavit.config import DEFAULT_MIN_FRACTION, DEFAULT_OVERLAP_MODE, DEFAULT_TAU
from bavit.errors import DataError, GeometryError


@dataclass(frozen=True)
class PatchGrid:
    image_width: int
    image_height: int
    patch_size: int

    def __post_init__(self):
        if self.patch_size <= 0 or self.image_width <= 0 or self.image_height <= 0:
            raise GeometryError(f"Invalid grid geometry: {self}")
        if self.image_width % self.patch_size or self.image_height % self.patch_size:
            raise GeometryError(
                f"Image {self.image_width}x{self.image_height} is not a multiple "
                f"of patch size {self.patch_size}"
            )

    @classmethod
    def from_shape(cls, rows: int, cols: int, patch_size: int) -> "PatchGrid":
        return cls(cols * patch_size, rows * patch_size, patch_size)

    @property
    def rows(self) -> int:
        return self.image_height // self.patch_size

    @property
    def cols(self) -> int:
        return self.image_width // self.patch_size

    @property
    def tokens(self) -> int:
        return self.rows * self.cols

    def patch_box(self, index: int) -> "BoundingBox":
        r, c = divmod(index, self.cols)
        k = self.patch_size
        return BoundingBox(c * k, r * k, (c + 1) * k, (r + 1) * k)


@dataclass(frozen=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(f"Degenerate rectangle: {self}")

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def intersection_area(self, other: "BoundingBox") -> int:
        w = min(self.x_max, other.x_max) - max(self.x_min, other.x_min)
        h = min(self.y_max, other.y_max) - max(self.y_min, other.y_min)
        return max(w, 0) * max(h, 0)

    def clamp(self, width: int, height: int) -> Optional["BoundingBox"]:
        """Clip to [0, width) × [0, height); None when nothing is left."""
        x0, y0 = max(self.x_min, 0), max(self.y_min, 0)
        x1, y1 = min(self.x_max, width), min(self.y_max, height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BoundingBox(x0, y0, x1, y1)

    @classmethod
    def from_xywh(cls, x, y, w, h, scale_x=1.0, scale_y=1.0) -> Optional["BoundingBox"]:
        """COCO-style top-left + size, scaled and rounded to whole pixels."""
        x0 = int(np.floor(x * scale_x + 0.5))
        y0 = int(np.floor(y * scale_y + 0.5))
        x1 = int(np.floor((x + w) * scale_x + 0.5))
        y1 = int(np.floor((y + h) * scale_y + 0.5))
        if x0 >= x1 or y0 >= y1:
            return None
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True, eq=False)
class SegMask:
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise GeometryError(f"Mask must be 2-D, got shape {self.values.shape}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class TokenLabelMap:
    grid: PatchGrid
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if labels.size != self.grid.tokens:
            raise GeometryError(
                f"Label count {labels.size} does not match grid {self.grid.rows}x{self.grid.cols}"
            )
        if np.any(labels > 1):
            raise GeometryError("Labels must be 0 (BG) or 1 (FG)")
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def as_grid(self) -> np.ndarray:
        return self.labels.reshape(self.grid.rows, self.grid.cols)

    @property
    def fg_count(self) -> int:
        return int(self.labels.sum())

    @property
    def fg_fraction(self) -> float:
        return self.fg_count / self.grid.tokens

    def __eq__(self, other):
        if not isinstance(other, TokenLabelMap):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.labels, other.labels)


class OverlapMode(str, Enum):
    JACCARD = "jaccard"
    PATCH_COVERAGE = "coverage"

    @classmethod
    def parse(cls, value) -> "OverlapMode":
        if isinstance(value, cls):
            return value
        aliases = {"patch_coverage": cls.PATCH_COVERAGE}
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise GeometryError(f"Unknown overlap mode '{value}'") from None


def jaccard(patch: BoundingBox, box: BoundingBox) -> float:
    """|P ∩ B| / |P ∪ B|."""
    inter = patch.intersection_area(box)
    return inter / (patch.area + box.area - inter)


def patch_coverage(patch: BoundingBox, box: BoundingBox) -> float:
    """|P ∩ B| / |P|."""
    return patch.intersection_area(box) / patch.area


def _axis_overlap(starts: np.ndarray, size: int, lo: int, hi: int) -> np.ndarray:
    return np.clip(np.minimum(starts + size, hi) - np.maximum(starts, lo), 0, None)


def label_from_boxes(
    grid: PatchGrid,
    boxes: Iterable[BoundingBox],
    tau: float = DEFAULT_TAU,
    mode=DEFAULT_OVERLAP_MODE,
) -> TokenLabelMap:
    """A patch is FG when some box overlaps it by at least tau."""
    if not 0.0 <= tau <= 1.0:
        raise GeometryError(f"tau must lie in [0, 1], got {tau}")
    mode = OverlapMode.parse(mode)

    k = grid.patch_size
    xs = np.arange(grid.cols, dtype=np.int64) * k
    ys = np.arange(grid.rows, dtype=np.int64) * k
    patch_area = k * k
    fg = np.zeros((grid.rows, grid.cols), dtype=bool)

    for box in boxes:
        box = box.clamp(grid.image_width, grid.image_height)
        if box is None:
            continue
        inter = np.outer(
            _axis_overlap(ys, k, box.y_min, box.y_max),
            _axis_overlap(xs, k, box.x_min, box.x_max),
        )
        if mode is OverlapMode.JACCARD:
            ratio = inter / (patch_area + box.area - inter)
        else:
            ratio = inter / patch_area
        fg |= ratio >= tau

    return TokenLabelMap(grid, fg.reshape(-1))


def label_from_mask(
    grid: PatchGrid, mask: SegMask, min_fraction: float = DEFAULT_MIN_FRACTION
) -> TokenLabelMap:
    """A patch is FG when strictly more than min_fraction of its pixels are nonzero."""
    if not 0.0 < min_fraction < 1.0:
        raise GeometryError(f"min_fraction must lie in (0, 1), got {min_fraction}")
    if mask.width != grid.image_width or mask.height != grid.image_height:
        raise GeometryError(
            f"Mask {mask.width}x{mask.height} does not match grid image "
            f"{grid.image_width}x{grid.image_height}"
        )

    k = grid.patch_size
    counts = (mask.values != 0).reshape(grid.rows, k, grid.cols, k).sum(axis=(1, 3))
    return TokenLabelMap(grid, (counts / (k * k) > min_fraction).reshape(-1))


def format_label_map(label_map: TokenLabelMap) -> str:
    bits = "".join("1" if v else "0" for v in label_map.labels)
    return f"{label_map.grid.rows} {label_map.grid.cols}\n{bits}\n"


def parse_label_map(text: str, patch_size: int, source="<string>") -> TokenLabelMap:
    lines = text.split()
    try:
        rows, cols, bits = int(lines[0]), int(lines[1]), lines[2] if len(lines) > 2 else ""
    except (IndexError, ValueError):
        raise DataError(f"{source}: expected 'rows cols' header and a label line") from None
    if len(bits) != rows * cols or set(bits) - {"0", "1"}:
        raise DataError(f"{source}: label line must hold {rows * cols} characters of 0/1")
    labels = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    return TokenLabelMap(PatchGrid.from_shape(rows, cols, patch_size), labels)


def write_label_map(path, label_map: TokenLabelMap):
    with open(path, "w") as f:
        f.write(format_label_map(label_map))


def read_label_map(path, patch_size: int) -> TokenLabelMap:
    with open(path, "r") as f:
        return parse_label_map(f.read(), patch_size, source=path)
