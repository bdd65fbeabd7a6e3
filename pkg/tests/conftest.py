import numpy as np
import pytest

from bavit.data import SynthSpec, generate_synthetic, make_batches
from bavit.labeling import write_label_map
from bavit.net import ModelConfig
from bavit.utils.image import to_uint8, write_image


@pytest.fixture
def tiny_config():
    return ModelConfig(
        image_width=32, image_height=32, patch_size=8, embed_dim=16, depth=1, heads=2, mlp_ratio=2
    )


@pytest.fixture
def synth_spec():
    return SynthSpec(image_size=32, patch_size=8, rng_seed=3)


@pytest.fixture
def synth_samples(synth_spec):
    return list(generate_synthetic(synth_spec, 8))


@pytest.fixture
def synth_batches(synth_samples):
    return list(make_batches(synth_samples, 4, shuffle_seed=0))


@pytest.fixture
def corpus_dir(tmp_path, synth_samples):
    """images/ + labels/ layout that load_labeled_dir and the CLI read."""
    root = tmp_path / "corpus"
    (root / "images").mkdir(parents=True)
    (root / "labels").mkdir()
    for sample in synth_samples:
        write_image(root / "images" / f"{sample.source_id}.ppm", to_uint8(sample.image))
        write_label_map(root / "labels" / f"{sample.source_id}.txt", sample.label_map)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
