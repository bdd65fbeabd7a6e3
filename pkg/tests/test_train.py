import json
import struct

import numpy as np
import pytest

from bavit.data import SynthSpec, generate_synthetic, make_batches, split_samples
from bavit.errors import CheckpointError, DivergenceError, GeometryError, NumericError
from bavit.net import ModelConfig, count_params, init_params
from bavit.postproc import CcaConfig
from bavit.train import (
    LrSchedule,
    OptimState,
    adam_step,
    classification_report,
    clip_grad_norm,
    evaluate,
    load_checkpoint,
    lr_at,
    predict_labels,
    save_checkpoint,
    train,
    train_step,
)

FAST = LrSchedule(base_lr=1e-2, step_size=100, gamma=0.5)


def test_step_schedule():
    schedule = LrSchedule(base_lr=1e-3, step_size=30, gamma=0.1)
    assert lr_at(schedule, 0) == 1e-3
    assert lr_at(schedule, 29) == 1e-3
    assert lr_at(schedule, 30) == pytest.approx(1e-4)
    assert lr_at(schedule, 65) == pytest.approx(1e-5)


def test_schedule_validation():
    with pytest.raises(GeometryError):
        LrSchedule(step_size=0)
    with pytest.raises(GeometryError):
        LrSchedule(base_lr=-1.0)


def test_first_adam_step_moves_by_lr():
    params = {"w": np.zeros(3, dtype=np.float32)}
    grads = {"w": np.array([1.0, -2.0, 0.5], dtype=np.float32)}
    state = OptimState.zeros_like(params, lr=0.1)

    new_params, new_state = adam_step(params, grads, state)

    np.testing.assert_allclose(new_params["w"], [-0.1, 0.1, -0.1], rtol=1e-5)
    assert new_state.step == 1
    assert not np.any(params["w"])
    assert state.step == 0 and not np.any(state.m["w"])


def test_adam_rejects_nan_gradients():
    params = {"w": np.zeros(2, dtype=np.float32)}
    state = OptimState.zeros_like(params)
    with pytest.raises(NumericError, match="'w'"):
        adam_step(params, {"w": np.array([np.nan, 0.0], dtype=np.float32)}, state)


def test_clip_grad_norm():
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([4.0])}
    clipped, norm = clip_grad_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(np.sum(g**2) for g in clipped.values()))
    assert total == pytest.approx(1.0, abs=1e-5)

    unclipped, _ = clip_grad_norm(grads, 0.0)
    assert unclipped is grads


def test_train_step(tiny_config, synth_batches):
    params = init_params(tiny_config, 0)
    state = OptimState.zeros_like(params)
    batch = synth_batches[0]
    new_params, new_state, loss, correct = train_step(params, tiny_config, batch, state, 1e-3)
    assert loss == pytest.approx(np.log(2), abs=0.1)
    assert 0 <= correct <= batch.labels.size
    assert new_state.step == 1
    assert not np.array_equal(new_params["head.bias"], params["head.bias"])


def test_training_reduces_loss(tiny_config, synth_batches):
    _, report, state = train(tiny_config, synth_batches, epochs=8, schedule=FAST, seed=0)
    assert len(report.epochs) == 8
    assert report.epochs[-1].loss < report.epochs[0].loss
    assert state.step == 8 * len(synth_batches)


def test_training_is_deterministic(tiny_config, synth_batches):
    a, report_a, _ = train(tiny_config, synth_batches, epochs=2, schedule=FAST, seed=4)
    b, report_b, _ = train(tiny_config, synth_batches, epochs=2, schedule=FAST, seed=4)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert report_a.to_rows() == report_b.to_rows()


def test_resumed_training_matches_uninterrupted(tiny_config, synth_batches, tmp_path):
    straight, _, _ = train(tiny_config, synth_batches, epochs=3, schedule=FAST, seed=2)

    params, _, state = train(tiny_config, synth_batches, epochs=1, schedule=FAST, seed=2)
    save_checkpoint(tmp_path / "mid.bavit", params, tiny_config, state)
    checkpoint = load_checkpoint(tmp_path / "mid.bavit")
    resumed, _, _ = train(
        tiny_config,
        synth_batches,
        epochs=2,
        schedule=FAST,
        seed=2,
        params=checkpoint.params,
        state=checkpoint.optim_state,
        start_epoch=1,
    )
    for name in straight:
        np.testing.assert_array_equal(straight[name], resumed[name])


def test_validation_accuracy_is_reported(tiny_config, synth_batches):
    _, report, _ = train(
        tiny_config, synth_batches[:1], epochs=1, schedule=FAST, val_data=synth_batches[1:]
    )
    rows = report.to_rows()
    assert 0.0 <= rows[0]["val_accuracy"] <= 1.0
    assert "seconds" not in rows[0]
    assert "seconds" in report.to_rows(include_timing=True)[0]


def test_divergence_saves_last_checkpoint(tiny_config, synth_batches, tmp_path):
    params = init_params(tiny_config, 0)
    params["head.weight"] = np.full_like(params["head.weight"], np.nan)
    path = tmp_path / "diverged.bavit"

    with pytest.raises(DivergenceError) as info:
        train(tiny_config, synth_batches, epochs=1, params=params, checkpoint_path=path)

    assert info.value.epoch == 0
    assert path.exists()
    assert np.isnan(load_checkpoint(path).params["head.weight"]).all()


def test_empty_training_data(tiny_config):
    with pytest.raises(GeometryError):
        train(tiny_config, [], epochs=1)


def test_evaluate_and_report(tiny_config, synth_batches):
    params = init_params(tiny_config, 1)
    accuracy = evaluate(params, tiny_config, synth_batches)
    metrics = classification_report(params, tiny_config, synth_batches)

    assert metrics["accuracy"] == pytest.approx(accuracy)
    assert metrics["tokens"] == 8 * tiny_config.tokens
    assert metrics["classes"]["bg"]["support"] + metrics["classes"]["fg"]["support"] == metrics["tokens"]
    assert np.sum(metrics["confusion"]) == metrics["tokens"]
    assert metrics["post_processing"] is False


def test_post_processing_only_adds_foreground(tiny_config, synth_batches):
    params = init_params(tiny_config, 1)
    plain = classification_report(params, tiny_config, synth_batches)
    smoothed = classification_report(params, tiny_config, synth_batches, CcaConfig())
    predicted_fg = lambda m: np.asarray(m["confusion"])[:, 1].sum()
    assert predicted_fg(smoothed) >= predicted_fg(plain)
    assert smoothed["post_processing"] is True


def test_checkpoint_round_trip(tiny_config, synth_batches, tmp_path):
    params, _, state = train(tiny_config, synth_batches, epochs=1, schedule=FAST)
    first = tmp_path / "a.bavit"
    save_checkpoint(first, params, tiny_config, state)

    checkpoint = load_checkpoint(first)
    assert checkpoint.config == tiny_config
    assert list(checkpoint.params) == list(params)
    for name in params:
        np.testing.assert_array_equal(checkpoint.params[name], params[name])
        np.testing.assert_array_equal(checkpoint.optim_state.v[name], state.v[name])
    assert checkpoint.optim_state.step == state.step
    assert checkpoint.optim_state.lr == state.lr

    second = tmp_path / "b.bavit"
    save_checkpoint(second, checkpoint.params, checkpoint.config, checkpoint.optim_state)
    assert first.read_bytes() == second.read_bytes()


def test_checkpoint_layout(tiny_config, tmp_path):
    path = tmp_path / "init.bavit"
    save_checkpoint(path, init_params(tiny_config, 0), tiny_config)
    raw = path.read_bytes()

    assert raw[:4] == b"BAVT"
    version, header_len = struct.unpack("<II", raw[4:12])
    header = json.loads(raw[12 : 12 + header_len])
    assert version == 1
    assert header["optimizer"] is None
    assert header["payload_bytes"] == 4 * count_params(tiny_config)
    assert len(raw) == 12 + header_len + header["payload_bytes"]
    assert load_checkpoint(path).optim_state is None


def _corrupt(path, mutate):
    raw = bytearray(path.read_bytes())
    path.write_bytes(bytes(mutate(raw)))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda raw: raw[:-4],
        lambda raw: raw[:10],
        lambda raw: b"XXXX" + raw[4:],
        lambda raw: raw[:4] + struct.pack("<I", 2) + raw[8:],
        lambda raw: raw[:-1] + bytes([raw[-1] ^ 0xFF]),
        lambda raw: raw[:12] + b"!" + raw[13:],
    ],
    ids=["truncated-payload", "truncated-header", "magic", "version", "checksum", "header-json"],
)
def test_corrupt_checkpoint(tiny_config, tmp_path, mutate):
    path = tmp_path / "c.bavit"
    save_checkpoint(path, init_params(tiny_config, 0), tiny_config)
    _corrupt(path, mutate)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def _edit_header(raw, edit):
    """Rewrite the JSON header in place, keeping the payload and its checksum."""
    _, header_len = struct.unpack("<II", raw[4:12])
    header = json.loads(raw[12 : 12 + header_len])
    edit(header)
    header_bytes = json.dumps(header).encode("utf-8")
    return raw[:4] + struct.pack("<II", 1, len(header_bytes)) + header_bytes + raw[12 + header_len :]


def _set_offset(header):
    header["tensors"][0]["offset"] = 10**9


def _swap_shape(header):
    header["tensors"][0]["shape"] = header["tensors"][0]["shape"][::-1]


def _negative_shape(header):
    header["tensors"][0]["shape"] = [-1]


def _drop_name(header):
    del header["tensors"][0]["name"]


def _optimizer_without_tensors(header):
    header["optimizer"] = {"step": 3, "lr": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


def _bad_config_key(header):
    header["config"]["depth_"] = 1


def _bad_config_value(header):
    header["config"]["embed_dim"] = "wide"


def _config_not_a_dict(header):
    header["config"] = [1, 2]


@pytest.mark.parametrize(
    "edit",
    [
        _set_offset,
        _swap_shape,
        _negative_shape,
        _drop_name,
        _optimizer_without_tensors,
        _bad_config_key,
        _bad_config_value,
        _config_not_a_dict,
    ],
)
def test_inconsistent_header(tiny_config, tmp_path, edit):
    path = tmp_path / "h.bavit"
    save_checkpoint(path, init_params(tiny_config, 0), tiny_config)
    _corrupt(path, lambda raw: _edit_header(bytes(raw), edit))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_incomplete_optimizer_header(tiny_config, tmp_path):
    params = init_params(tiny_config, 0)
    path = tmp_path / "o.bavit"
    save_checkpoint(path, params, tiny_config, OptimState.zeros_like(params))
    _corrupt(path, lambda raw: _edit_header(bytes(raw), lambda h: h["optimizer"].pop("beta2")))
    with pytest.raises(CheckpointError, match="optimizer"):
        load_checkpoint(path)


@pytest.mark.slow
def test_synthetic_corpus_reaches_target_accuracy():
    spec = SynthSpec(image_size=128, patch_size=16, rng_seed=1)
    train_samples, val_samples = split_samples(list(generate_synthetic(spec, 600)), 100)
    config = ModelConfig.square(128, patch_size=16, embed_dim=64, depth=2, heads=4)

    params, report, _ = train(
        config,
        make_batches(train_samples, 32, shuffle_seed=0),
        epochs=200,
        schedule=LrSchedule(base_lr=1e-3, step_size=80, gamma=0.1),
        val_data=make_batches(val_samples, 32, shuffle_seed=None),
    )
    assert max(s.val_accuracy for s in report.epochs) >= 0.90

    predictions = predict_labels(params, config, next(iter(make_batches(val_samples, 8, None))).images)
    assert predictions.shape == (8, config.tokens)


@pytest.mark.slow
def test_deeper_model_is_not_less_accurate():
    spec = SynthSpec(image_size=128, patch_size=16, rng_seed=1)
    train_samples, val_samples = split_samples(list(generate_synthetic(spec, 600)), 100)
    batches = list(make_batches(train_samples, 32, shuffle_seed=0))
    val_batches = list(make_batches(val_samples, 32, shuffle_seed=None))

    accuracy = {}
    for depth in (2, 10):
        config = ModelConfig.square(128, patch_size=16, embed_dim=64, depth=depth, heads=4)
        params, _, _ = train(
            config, batches, epochs=100, schedule=LrSchedule(base_lr=1e-3, step_size=60, gamma=0.1)
        )
        accuracy[depth] = evaluate(params, config, val_batches)
    assert accuracy[10] >= accuracy[2] - 0.005
