"""Image I/O and resampling on top of Pillow.

RGB images are binary PPM (P6) and masks binary PGM (P5), both 8-bit. Arrays
are uint8, shaped H×W×3 for images and H×W for masks.
"""

import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from bavit.errors import DataError
from bavit.utils.logging import get_logger

logger = get_logger(__name__)


def _open(path):
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"Cannot decode image {path}: {e}") from e
    return img


def read_ppm(path) -> np.ndarray:
    img = _open(path)
    if img.format != "PPM" or img.mode != "RGB":
        raise DataError(f"{path}: expected an RGB PPM (P6) image, got {img.format} {img.mode}")
    return np.asarray(img, dtype=np.uint8).copy()


def read_pgm(path) -> np.ndarray:
    img = _open(path)
    if img.format != "PPM" or img.mode != "L":
        raise DataError(f"{path}: expected an 8-bit PGM (P5) mask")
    return np.asarray(img, dtype=np.uint8).copy()


def write_image(path, array: np.ndarray):
    """Write H×W×3 (PPM) or H×W (PGM) uint8 data; a .png suffix writes PNG."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim == 3 and array.shape[2] != 3:
        raise DataError(f"Cannot write image with {array.shape[2]} channels")
    if array.ndim not in (2, 3):
        raise DataError(f"Cannot write image with shape {array.shape}")

    ext = os.path.splitext(str(path))[1].lower()
    image_format = "PNG" if ext == ".png" else "PPM"
    Image.fromarray(array).save(path, format=image_format)


def convert_image(src, dst, mask=False):
    """Convert any Pillow-readable file into a native PPM (or PGM when mask=True)."""
    img = _open(src)
    img = img.convert("L" if mask else "RGB")
    img.save(dst, format="PPM")
    logger.info(f"Converted {src} -> {dst} ({img.mode} {img.size[0]}x{img.size[1]})")
    return img.size


def resize_image(array: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of an RGB uint8 image."""
    if array.shape[1] == width and array.shape[0] == height:
        return array
    img = Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8))
    return np.asarray(img.resize((width, height), Image.Resampling.BILINEAR)).copy()


def resize_mask(array: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resize, so class ids stay categorical."""
    if array.shape[1] == width and array.shape[0] == height:
        return array
    img = Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8))
    return np.asarray(img.resize((width, height), Image.Resampling.NEAREST)).copy()


def to_float(array: np.ndarray) -> np.ndarray:
    return array.astype(np.float32) / 255.0


def to_uint8(array: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(array) * 255.0), 0, 255).astype(np.uint8)
