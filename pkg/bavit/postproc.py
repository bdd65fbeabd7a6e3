"""Neighborhood-count smoothing that turns isolated BG patches into FG.

Each step convolves the FG indicator grid with a 3×3 kernel (zero padding)
and flips a BG cell to FG when the weighted FG-neighbor sum is strictly
greater than the threshold. FG cells never change.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from bavit.config import DEFAULT_CCA_STEPS, DEFAULT_CCA_THRESHOLD
from bavit.errors import GeometryError
from bavit.labeling import TokenLabelMap


def eight_neighborhood() -> np.ndarray:
    kernel = np.ones((3, 3), dtype=np.int64)
    kernel[1, 1] = 0
    return kernel


def four_neighborhood() -> np.ndarray:
    return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class CcaConfig:
    kernel: np.ndarray = field(default_factory=eight_neighborhood)
    threshold: int = DEFAULT_CCA_THRESHOLD
    steps: int = DEFAULT_CCA_STEPS

    def __post_init__(self):
        kernel = np.asarray(self.kernel)
        if kernel.shape != (3, 3):
            raise GeometryError(f"CCA kernel must be 3×3, got {kernel.shape}")
        if kernel[1, 1] != 0:
            raise GeometryError("CCA kernel center weight must be 0")
        if self.threshold < 0 or self.steps < 0:
            raise GeometryError(f"Invalid CCA threshold/steps: {self.threshold}/{self.steps}")


def cca_step(labels: TokenLabelMap, config: CcaConfig) -> TokenLabelMap:
    fg = labels.as_grid().astype(np.float64)
    neighbors = ndimage.correlate(fg, np.asarray(config.kernel), mode="constant", cval=0)
    grown = (fg == 1) | (neighbors > config.threshold)
    return TokenLabelMap(labels.grid, grown.reshape(-1))


def cca(labels: TokenLabelMap, config: CcaConfig = CcaConfig()) -> TokenLabelMap:
    for _ in range(config.steps):
        labels = cca_step(labels, config)
    return labels
