import json
import os
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from bavit.config import (
    DEFAULT_MIN_FRACTION,
    DEFAULT_PATCH_SIZE,
    DEFAULT_TAU,
    PIXEL_MEAN,
    PIXEL_STD,
)
from bavit.errors import AnnotationParseError, DataError, GeometryError, SampleError
from bavit.labeling import (
    BoundingBox,
    OverlapMode,
    PatchGrid,
    SegMask,
    TokenLabelMap,
    label_from_boxes,
    label_from_mask,
    read_label_map,
)
from bavit.utils.image import read_pgm, read_ppm, resize_image, resize_mask, to_float
from bavit.utils.logging import get_logger

logger = get_logger(__name__)

SHAPE_KINDS = ("rectangle", "ellipse")
# shape ids are stored in an 8-bit mask
MAX_SYNTH_SHAPES = 255


@dataclass(frozen=True, eq=False)
class AnnotatedSample:
    image: np.ndarray  # H×W×3 float32 in [0, 1]
    label_map: TokenLabelMap
    source_id: str
    mask: Optional[SegMask] = None

    def __post_init__(self):
        grid = self.label_map.grid
        if self.image.shape != (grid.image_height, grid.image_width, 3):
            raise GeometryError(
                f"{self.source_id}: image shape {self.image.shape} does not match "
                f"grid {grid.image_width}x{grid.image_height}"
            )


@dataclass(frozen=True, eq=False)
class Batch:
    images: np.ndarray  # B×H×W×3, normalized
    labels: np.ndarray  # B×M in {0, 1}
    source_ids: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class SynthSpec:
    image_size: int = 128
    patch_size: int = DEFAULT_PATCH_SIZE
    min_shapes: int = 1
    max_shapes: int = 4
    kinds: Tuple[str, ...] = SHAPE_KINDS
    rng_seed: int = 1
    min_fraction: float = DEFAULT_MIN_FRACTION

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise GeometryError(
                f"Synthetic image size {self.image_size} is not a multiple of {self.patch_size}"
            )
        if self.min_shapes < 0 or not self.min_shapes <= self.max_shapes <= MAX_SYNTH_SHAPES:
            raise GeometryError(
                f"Invalid shapes_per_image range {self.min_shapes}..{self.max_shapes}"
            )
        unknown = set(self.kinds) - set(SHAPE_KINDS)
        if unknown or not self.kinds:
            raise GeometryError(f"Unknown shape kinds: {sorted(unknown)}")

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid(self.image_size, self.image_size, self.patch_size)


def normalize(images: np.ndarray) -> np.ndarray:
    return ((images - PIXEL_MEAN) / PIXEL_STD).astype(np.float32)


def _record_error(errors: Optional[List[SampleError]], source_id: str, message: str):
    logger.warning(f"Skipping sample {source_id}: {message}")
    if errors is not None:
        errors.append(SampleError(source_id, message))


def _require_dir(path, what: str):
    if not os.path.isdir(path):
        raise DataError(f"{path}: {what} directory does not exist")


def read_json(path):
    """Parse a JSON file; syntax errors report the byte offset of the failure."""
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise AnnotationParseError(path, e.start, "invalid UTF-8") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise AnnotationParseError(path, offset, e.msg) from e


def _read_annotations(annotation_file) -> Dict:
    data = read_json(annotation_file)

    if not isinstance(data, dict) or not isinstance(data.get("images", []), list):
        raise DataError(f"{annotation_file}: top level must be an object with an 'images' list")

    boxes: Dict[int, List[Tuple[float, float, float, float]]] = {}
    try:
        for b in data.get("boxes", []):
            boxes.setdefault(int(b["image_id"]), []).append(
                (float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"]))
            )
        images = [
            {
                "id": int(img["id"]),
                "file": str(img["file"]),
                "width": int(img["width"]),
                "height": int(img["height"]),
            }
            for img in data.get("images", [])
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{annotation_file}: record does not match the schema ({e!r})") from e

    return {"images": images, "boxes": boxes}


def load_detection_dataset(
    annotation_file,
    image_dir,
    image_size: int,
    patch_size: int = DEFAULT_PATCH_SIZE,
    tau: float = DEFAULT_TAU,
    mode=OverlapMode.PATCH_COVERAGE,
    errors: Optional[List[SampleError]] = None,
) -> Iterator[AnnotatedSample]:
    """Stream samples from the box annotation schema.

    The JSON is parsed eagerly, so a malformed file fails before the first
    sample. Missing or unreadable images are recorded in `errors` and skipped.
    """
    grid = PatchGrid(image_size, image_size, patch_size)
    mode = OverlapMode.parse(mode)
    _require_dir(image_dir, "image")
    annotations = _read_annotations(annotation_file)
    logger.info(
        f"Loaded {len(annotations['images'])} image records from {annotation_file}"
    )

    def samples():
        for record in annotations["images"]:
            source_id = str(record["id"])
            path = os.path.join(image_dir, record["file"])
            try:
                pixels = read_ppm(path)
            except FileNotFoundError:
                _record_error(errors, source_id, f"missing image file {path}")
                continue
            except DataError as e:
                _record_error(errors, source_id, str(e))
                continue

            height, width = pixels.shape[:2]
            if (width, height) != (record["width"], record["height"]):
                logger.warning(
                    f"Image {source_id}: declared {record['width']}x{record['height']}, "
                    f"file is {width}x{height}; using the file size"
                )
            sx, sy = grid.image_width / width, grid.image_height / height
            boxes = []
            for x, y, w, h in annotations["boxes"].get(record["id"], []):
                box = BoundingBox.from_xywh(x, y, w, h, sx, sy)
                if box is None:
                    logger.debug(f"Image {source_id}: box {(x, y, w, h)} vanishes after scaling")
                    continue
                boxes.append(box)

            image = to_float(resize_image(pixels, grid.image_width, grid.image_height))
            label_map = label_from_boxes(grid, boxes, tau, mode)
            stem = os.path.splitext(os.path.basename(record["file"]))[0]
            yield AnnotatedSample(image, label_map, stem)

    return samples()


def load_mask_dataset(
    mask_dir,
    image_dir,
    image_size: int,
    patch_size: int = DEFAULT_PATCH_SIZE,
    min_fraction: float = DEFAULT_MIN_FRACTION,
    errors: Optional[List[SampleError]] = None,
) -> Iterator[AnnotatedSample]:
    """Stream samples for images/<stem>.ppm paired with masks/<stem>.pgm."""
    grid = PatchGrid(image_size, image_size, patch_size)
    _require_dir(image_dir, "image")
    _require_dir(mask_dir, "mask")
    names = sorted(f for f in os.listdir(image_dir) if f.endswith(".ppm"))
    logger.info(f"Found {len(names)} images in {image_dir}")

    for name in names:
        stem = os.path.splitext(name)[0]
        mask_path = os.path.join(mask_dir, f"{stem}.pgm")
        if not os.path.isfile(mask_path):
            _record_error(errors, stem, f"missing mask file {mask_path}")
            continue
        try:
            pixels = read_ppm(os.path.join(image_dir, name))
            mask = read_pgm(mask_path)
        except DataError as e:
            _record_error(errors, stem, str(e))
            continue

        mask = resize_mask(mask, grid.image_width, grid.image_height)
        if mask.shape != (grid.image_height, grid.image_width):
            raise GeometryError(f"{stem}: mask is {mask.shape} after resize")
        image = to_float(resize_image(pixels, grid.image_width, grid.image_height))
        seg = SegMask(mask)
        yield AnnotatedSample(image, label_from_mask(grid, seg, min_fraction), stem, seg)


def load_labeled_dir(
    data_dir,
    patch_size: int = DEFAULT_PATCH_SIZE,
    errors: Optional[List[SampleError]] = None,
) -> Iterator[AnnotatedSample]:
    """Stream a directory of images/<stem>.ppm and labels/<stem>.txt pairs."""
    image_dir = os.path.join(data_dir, "images")
    label_dir = os.path.join(data_dir, "labels")
    if not os.path.isdir(label_dir):
        raise DataError(f"{data_dir}: no labels/ directory")
    names = sorted(f for f in os.listdir(label_dir) if f.endswith(".txt"))

    for name in names:
        stem = os.path.splitext(name)[0]
        image_path = os.path.join(image_dir, f"{stem}.ppm")
        try:
            label_map = read_label_map(os.path.join(label_dir, name), patch_size)
            pixels = read_ppm(image_path)
        except FileNotFoundError:
            _record_error(errors, stem, f"missing image file {image_path}")
            continue
        except DataError as e:
            _record_error(errors, stem, str(e))
            continue
        grid = label_map.grid
        image = to_float(resize_image(pixels, grid.image_width, grid.image_height))
        yield AnnotatedSample(image, label_map, stem)


def _smooth_field(rng: np.random.Generator, size: int, cells: int = 4) -> np.ndarray:
    coarse = rng.uniform(0.3, 0.7, size=(cells, cells)).astype(np.float32)
    img = Image.fromarray(coarse).resize((size, size), Image.Resampling.BILINEAR)
    return np.asarray(img, dtype=np.float32)


def _vivid_color(rng: np.random.Generator) -> np.ndarray:
    hi = rng.uniform(0.75, 1.0)
    lo = rng.uniform(0.0, 0.2)
    mid = rng.uniform(lo, hi)
    return np.array([hi, lo, mid], dtype=np.float32)[rng.permutation(3)]


def _shape_raster(rng, kind: str, size: int) -> np.ndarray:
    w, h = rng.integers(size // 8, size * 7 // 16 + 1, size=2)
    x0 = rng.integers(0, size - w + 1)
    y0 = rng.integers(0, size - h + 1)
    if kind == "rectangle":
        raster = np.zeros((size, size), dtype=bool)
        raster[y0 : y0 + h, x0 : x0 + w] = True
        return raster

    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    cx, cy = x0 + w / 2, y0 + h / 2
    return ((xx - cx) / (w / 2)) ** 2 + ((yy - cy) / (h / 2)) ** 2 <= 1.0


def synthesize_sample(spec: SynthSpec, index: int) -> AnnotatedSample:
    """Solid vivid shapes over a low-saturation textured background."""
    rng = np.random.default_rng([spec.rng_seed, index])
    size = spec.image_size

    luminance = _smooth_field(rng, size) + rng.normal(0.0, 0.04, (size, size))
    image = luminance[..., None] + rng.normal(0.0, 0.015, (size, size, 3))
    classes = np.zeros((size, size), dtype=np.uint8)

    n_shapes = rng.integers(spec.min_shapes, spec.max_shapes + 1)
    for shape_id in range(1, n_shapes + 1):
        kind = spec.kinds[rng.integers(len(spec.kinds))]
        raster = _shape_raster(rng, kind, size)
        shade = rng.normal(0.0, 0.03, (size, size, 1))
        image = np.where(raster[..., None], _vivid_color(rng) + shade, image)
        classes[raster] = shape_id

    pixels = np.clip(np.rint(np.clip(image, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    mask = SegMask(classes)
    label_map = label_from_mask(spec.grid, mask, spec.min_fraction)
    return AnnotatedSample(to_float(pixels), label_map, f"synth_{index:05d}", mask)


def generate_synthetic(spec: SynthSpec, n: int) -> Iterator[AnnotatedSample]:
    if n < 1:
        raise GeometryError(f"Number of synthetic samples must be >= 1, got {n}")
    for index in range(n):
        yield synthesize_sample(spec, index)


def make_batches(
    samples: Iterable[AnnotatedSample], batch_size: int, shuffle_seed: Optional[int] = 0
) -> Iterator[Batch]:
    """Shuffle deterministically and emit batches; the last one may be partial.

    shuffle_seed=None keeps the input order.
    """
    if batch_size < 1:
        raise GeometryError(f"batch_size must be >= 1, got {batch_size}")
    samples = list(samples)
    if not samples:
        return iter(())

    grid = samples[0].label_map.grid
    for s in samples:
        if s.label_map.grid != grid:
            raise GeometryError(
                f"Sample {s.source_id} has grid {s.label_map.grid}, expected {grid}"
            )

    order = np.arange(len(samples))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(samples))

    def batches():
        for start in range(0, len(order), batch_size):
            chunk = [samples[i] for i in order[start : start + batch_size]]
            yield Batch(
                images=normalize(np.stack([s.image for s in chunk])),
                labels=np.stack([s.label_map.labels for s in chunk]).astype(np.int64),
                source_ids=tuple(s.source_id for s in chunk),
            )

    return batches()


def convert_coco(coco: Dict) -> Dict:
    """Reduce a COCO detection file to the minimal {"images", "boxes"} schema."""
    try:
        images = [
            {
                "id": int(img["id"]),
                "file": str(img["file_name"]),
                "width": int(img["width"]),
                "height": int(img["height"]),
            }
            for img in coco.get("images", [])
        ]
        boxes = []
        for ann in coco.get("annotations", []):
            x, y, w, h = (float(v) for v in ann["bbox"])
            boxes.append({"image_id": int(ann["image_id"]), "x": x, "y": y, "w": w, "h": h})
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"COCO record does not match the expected layout ({e!r})") from e
    return {"images": images, "boxes": boxes}


def split_samples(
    samples: Sequence[AnnotatedSample], n_val: int
) -> Tuple[List[AnnotatedSample], List[AnnotatedSample]]:
    samples = list(samples)
    return samples[: len(samples) - n_val], samples[len(samples) - n_val :]
