import numpy as np
import pytest

from bavit.errors import GeometryError
from bavit.labeling import PatchGrid, TokenLabelMap
from bavit.postproc import CcaConfig, cca, cca_step, eight_neighborhood, four_neighborhood


def _labels(rows):
    rows = np.array(rows, dtype=np.uint8)
    return TokenLabelMap(PatchGrid.from_shape(*rows.shape, 16), rows.reshape(-1))


def test_hole_inside_foreground_is_filled():
    labels = _labels([[1, 1, 1], [1, 0, 1], [1, 1, 1]])
    assert cca(labels).fg_count == 9


def test_isolated_foreground_does_not_spread():
    labels = _labels([[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0]])
    assert cca(labels) == labels


def test_threshold_is_strict_and_border_is_zero_padded():
    two = _labels([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    step = cca_step(two, CcaConfig(steps=1))
    assert step.as_grid()[0, 0] == 0

    three = _labels([[0, 1, 0], [1, 1, 0], [0, 0, 0]])
    step = cca_step(three, CcaConfig(steps=1))
    assert step.as_grid()[0, 0] == 1


def test_foreground_is_never_removed(rng):
    labels = _labels(rng.integers(0, 2, size=(6, 7)))
    out = cca(labels, CcaConfig(steps=4))
    assert np.all(out.labels >= labels.labels)


def test_zero_steps_is_identity():
    labels = _labels([[0, 1], [1, 0]])
    assert cca(labels, CcaConfig(steps=0)) == labels


def test_steps_compound():
    labels = _labels([[1, 1, 1, 0, 0], [1, 1, 1, 0, 0]])
    one = cca(labels, CcaConfig(threshold=1, steps=1))
    np.testing.assert_array_equal(one.as_grid(), [[1, 1, 1, 1, 0], [1, 1, 1, 1, 0]])
    assert cca(labels, CcaConfig(threshold=1, steps=2)).fg_count == 10


def test_four_neighborhood():
    labels = _labels([[1, 0, 1], [0, 0, 0], [1, 0, 1]])
    assert cca(labels, CcaConfig(kernel=eight_neighborhood(), threshold=2, steps=1)).fg_count == 5
    assert cca(labels, CcaConfig(kernel=four_neighborhood(), threshold=2, steps=1)) == labels


def test_weighted_kernel_is_not_truncated():
    kernel = np.full((3, 3), 0.5)
    kernel[1, 1] = 0
    labels = _labels([[1, 1, 1], [1, 0, 0], [0, 0, 0]])
    # 4 neighbors × 0.5 = 2.0, not > 2
    assert cca(labels, CcaConfig(kernel=kernel, threshold=2, steps=1)).as_grid()[1, 1] == 0


def test_config_validation():
    with pytest.raises(GeometryError):
        CcaConfig(kernel=np.ones((3, 3)))
    with pytest.raises(GeometryError):
        CcaConfig(kernel=np.zeros((5, 5)))
    with pytest.raises(GeometryError):
        CcaConfig(steps=-1)


def _neighbor_step(fg, kernel, threshold):
    """One smoothing step by walking every cell's 3×3 neighborhood."""
    rows, cols = fg.shape
    out = fg.copy()
    for r in range(rows):
        for c in range(cols):
            if fg[r, c]:
                continue
            total = 0
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < rows and 0 <= cc < cols:
                        total += kernel[dr + 1, dc + 1] * fg[rr, cc]
            out[r, c] = total > threshold
    return out


def _random_kernel(rng):
    choice = rng.integers(3)
    if choice == 0:
        return eight_neighborhood()
    if choice == 1:
        return four_neighborhood()
    kernel = rng.integers(0, 3, size=(3, 3))
    kernel[1, 1] = 0
    return kernel


def test_step_matches_neighbor_walk():
    rng = np.random.default_rng(77)
    for _ in range(200):
        rows, cols = (int(v) for v in rng.integers(1, 33, size=2))
        fg = (rng.uniform(size=(rows, cols)) < rng.uniform()).astype(np.uint8)
        kernel = _random_kernel(rng)
        threshold = int(rng.integers(0, 6))

        step = cca_step(_labels(fg), CcaConfig(kernel=kernel, threshold=threshold, steps=1))
        np.testing.assert_array_equal(step.as_grid(), _neighbor_step(fg, kernel, threshold))


def test_fixpoint_is_stable(rng):
    for _ in range(50):
        labels = _labels(rng.integers(0, 2, size=tuple(rng.integers(2, 12, size=2))))
        config = CcaConfig(threshold=int(rng.integers(0, 4)), steps=1)
        while True:
            nxt = cca_step(labels, config)
            if nxt == labels:
                break
            labels = nxt
        assert cca(labels, CcaConfig(threshold=config.threshold, steps=5)) == labels


@pytest.mark.parametrize("kernel", [eight_neighborhood(), four_neighborhood()], ids=["eight", "four"])
def test_step_commutes_with_rotation(rng, kernel):
    config = CcaConfig(kernel=kernel, threshold=1, steps=1)
    for _ in range(30):
        fg = rng.integers(0, 2, size=tuple(rng.integers(1, 16, size=2)))
        rotated = cca_step(_labels(np.rot90(fg)), config).as_grid()
        np.testing.assert_array_equal(rotated, np.rot90(cca_step(_labels(fg), config).as_grid()))


def test_isolated_hole_flips_in_one_step():
    grid = np.ones((5, 5), dtype=np.uint8)
    grid[2, 2] = 0
    step = cca_step(_labels(grid), CcaConfig(steps=1))
    assert step.fg_count == 25
