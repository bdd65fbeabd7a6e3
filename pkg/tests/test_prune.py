import numpy as np
import pytest

from bavit.config import REPORT_SPARSITIES
from bavit.errors import GeometryError, ShapeError
from bavit.labeling import PatchGrid, TokenLabelMap
from bavit.postproc import CcaConfig
from bavit.prune import (
    PruneMask,
    apply_mask,
    detector_mask,
    mask_from_probs,
    prune_report,
    reduction_table,
    theta_for_sparsity,
    token_reduction,
    upscale_labels,
)


def _probs(p_bg):
    p_bg = np.asarray(p_bg, dtype=np.float64)
    return np.stack([p_bg, 1.0 - p_bg], axis=-1)


def test_report_at_35_percent():
    report = prune_report(0.35)
    assert report.detector_tokens == 12288
    assert report.bavit_tokens == 1152
    assert report.pruned_detector_tokens == 7987
    assert report.combined_tokens == 9139
    assert report.reduction_pct == pytest.approx(3149 / 12288)


def test_no_sparsity_costs_the_classifier():
    assert prune_report(0.0).reduction_pct == -0.09375


PUBLISHED_ROWS = [
    # sparsity, pruned detector tokens, detector + classifier tokens, reduction
    (0.46, 6635, 7787, 0.3663),
    (0.43, 7004, 8156, 0.3363),
    (0.40, 7372, 8524, 0.3063),
    (0.39, 7495, 8647, 0.2963),
    (0.37, 7741, 8893, 0.2763),
    (0.35, 7987, 9139, 0.2563),
    (0.32, 8355, 9507, 0.2260),
    (0.29, 8724, 9876, 0.1960),
    (0.05, 11673, 12825, -0.0437),
    (0.02, 12042, 13194, -0.0738),
    (0.00, 12288, 13440, -0.09375),
]


@pytest.mark.parametrize("sparsity, pruned, combined, reduction", PUBLISHED_ROWS)
def test_reduction_rows(sparsity, pruned, combined, reduction):
    report = prune_report(sparsity)
    assert report.pruned_detector_tokens == pruned
    assert report.combined_tokens == combined
    assert report.reduction_pct == pytest.approx(reduction, abs=5e-4)


def test_default_table_covers_published_sparsities():
    rows = reduction_table(REPORT_SPARSITIES)
    assert [(r.sparsity, r.pruned_detector_tokens, r.combined_tokens) for r in rows] == [
        row[:3] for row in PUBLISHED_ROWS
    ]


def test_table_rows_are_ordered_and_monotone():
    rows = reduction_table(REPORT_SPARSITIES)
    assert [r.sparsity for r in rows] == list(REPORT_SPARSITIES)
    reductions = [r.reduction_pct for r in rows]
    assert reductions == sorted(reductions, reverse=True)
    assert set(rows[0].to_dict()) == {
        "sparsity",
        "bavit_tokens",
        "detector_tokens",
        "pruned_detector_tokens",
        "combined_tokens",
        "reduction_pct",
    }


def test_report_validation():
    with pytest.raises(GeometryError):
        prune_report(1.2)
    with pytest.raises(GeometryError):
        prune_report(0.5, detector_tokens=0)


def test_threshold_is_strict():
    grid = PatchGrid(32, 16, 16)
    mask = mask_from_probs(_probs([0.5, 0.51]), grid, theta=0.5)
    np.testing.assert_array_equal(mask.keep, [True, False])
    assert mask.pruned == 1
    assert mask.sparsity == 0.5


def test_threshold_extremes(rng):
    grid = PatchGrid(64, 64, 16)
    probs = _probs(rng.uniform(0.01, 0.99, size=16))
    assert mask_from_probs(probs, grid, 1.0).pruned == 0
    assert mask_from_probs(probs, grid, 0.0).pruned == 16


def test_mask_shape_checks():
    with pytest.raises(ShapeError):
        mask_from_probs(_probs([0.1, 0.2, 0.3]), PatchGrid(32, 16, 16), 0.5)
    with pytest.raises(GeometryError):
        mask_from_probs(_probs([0.1, 0.2]), PatchGrid(32, 16, 16), 1.5)


def test_theta_hits_target_sparsity(rng):
    grid = PatchGrid(160, 160, 16)
    probs = [_probs(rng.uniform(size=100)) for _ in range(20)]
    theta = theta_for_sparsity(probs, 0.35)
    mean = np.mean([mask_from_probs(p, grid, theta).sparsity for p in probs])
    assert mean == pytest.approx(0.35, abs=0.01)


def test_theta_needs_data():
    with pytest.raises(GeometryError):
        theta_for_sparsity([], 0.3)
    with pytest.raises(GeometryError):
        theta_for_sparsity([_probs([0.5])], 1.0)


def test_upscale_nearest():
    src = TokenLabelMap(PatchGrid(32, 32, 16), [1, 0, 0, 1])
    dst = upscale_labels(src, PatchGrid(64, 64, 16))
    np.testing.assert_array_equal(
        dst.as_grid(), [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]]
    )


def test_upscale_24_to_32_every_cell(rng):
    src = TokenLabelMap(PatchGrid.from_shape(24, 24, 16), rng.integers(0, 2, size=576))
    dst = upscale_labels(src, PatchGrid.from_shape(32, 32, 16))
    src_grid, dst_grid = src.as_grid(), dst.as_grid()
    for r in range(32):
        for c in range(32):
            assert dst_grid[r, c] == src_grid[(r * 24) // 32, (c * 24) // 32], (r, c)


def test_upscale_equal_grids_is_identity(rng):
    src = TokenLabelMap(PatchGrid.from_shape(5, 7, 16), rng.integers(0, 2, size=35))
    assert upscale_labels(src, src.grid) == src


def test_raising_theta_never_prunes_a_kept_token(rng):
    grid = PatchGrid(128, 128, 16)
    probs = _probs(rng.uniform(size=64))
    thetas = np.sort(rng.uniform(size=20))
    keeps = [mask_from_probs(probs, grid, t).keep for t in thetas]
    for low, high in zip(keeps, keeps[1:]):
        assert np.all(high[low])


def test_upscale_non_integer_ratio():
    src = TokenLabelMap(PatchGrid(48, 16, 16), [1, 0, 1])
    dst = upscale_labels(src, PatchGrid(64, 16, 16))
    np.testing.assert_array_equal(dst.labels, [1, 1, 0, 1])


def test_upscale_refuses_downscale():
    src = TokenLabelMap(PatchGrid(64, 64, 16), np.zeros(16))
    with pytest.raises(GeometryError):
        upscale_labels(src, PatchGrid(32, 32, 16))


def test_apply_mask_gathers_and_restores(rng):
    grid = PatchGrid(32, 32, 16)
    mask = PruneMask(grid, [True, False, True, False])
    tokens = rng.normal(size=(2, 4, 3))

    kept, restore = apply_mask(tokens, mask)
    np.testing.assert_array_equal(kept, tokens[:, [0, 2]])

    restored = restore(kept * 2)
    np.testing.assert_array_equal(restored[:, [0, 2]], tokens[:, [0, 2]] * 2)
    assert not np.any(restored[:, [1, 3]])

    with pytest.raises(ShapeError):
        restore(kept[:, :1])


def test_apply_mask_shape_check():
    mask = PruneMask(PatchGrid(32, 32, 16), [True] * 4)
    with pytest.raises(ShapeError):
        apply_mask(np.zeros((1, 5, 2)), mask)


def test_mask_label_round_trip():
    labels = TokenLabelMap(PatchGrid(32, 32, 16), [1, 0, 0, 1])
    mask = PruneMask.from_label_map(labels)
    assert mask.as_label_map() == labels
    assert not mask.keep.flags.writeable


def test_detector_mask():
    bavit_grid = PatchGrid(32, 32, 16)
    detector_grid = PatchGrid.from_shape(4, 4, 16)
    probs = _probs([0.9, 0.1, 0.9, 0.9])
    mask = detector_mask(probs, bavit_grid, detector_grid, theta=0.5)
    assert mask.grid == detector_grid
    assert mask.sparsity == 0.75


def test_detector_mask_with_post_processing():
    bavit_grid = PatchGrid(48, 48, 16)
    detector_grid = PatchGrid.from_shape(6, 6, 16)
    p_bg = np.full(9, 0.1)
    p_bg[4] = 0.9
    plain = detector_mask(_probs(p_bg), bavit_grid, detector_grid, 0.5)
    smoothed = detector_mask(_probs(p_bg), bavit_grid, detector_grid, 0.5, CcaConfig())
    assert plain.pruned == 4
    assert smoothed.pruned == 0


def test_token_reduction_averages_images():
    per_image = [(12288, 1152, 0.35), (12288, 1152, 0.0)]
    expected = (prune_report(0.35).reduction_pct + prune_report(0.0).reduction_pct) / 2
    assert token_reduction(per_image) == pytest.approx(expected)
    with pytest.raises(GeometryError):
        token_reduction([])
