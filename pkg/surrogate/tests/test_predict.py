"""Prediction export and the weights archive file contracts."""

import json

import numpy as np
import pytest

from fnosurrogate import (
    ContainerError,
    FieldOperator,
    SurrogateConfig,
    channels_to_fields,
    load_weights,
    predict_grid,
    predict_to_file,
    read_container,
    read_sidecar,
    save_weights,
    sidecar_path,
    write_container,
)

from conftest import TINY_CONFIG


def test_predict_to_file_round_trip(tiny_weights_path, first_model, tmp_path):
    out = tmp_path / "pred.pft"
    fields = predict_to_file(tiny_weights_path, first_model, out)
    assert fields.shape == (6, 3, 8, 8, 8)
    assert np.all(np.isfinite(fields))
    back = read_container(out)
    assert back.dtype == np.float64
    assert np.array_equal(back, fields)
    meta = read_sidecar(out)
    # values are already physical, so no normalization block is advertised
    assert "normalization" not in meta
    assert meta["n"] == 8
    assert meta["nu"] == read_sidecar(first_model)["nu"]


def test_predict_to_file_matches_in_memory_evaluation(
    tiny_weights_path, first_model, tmp_path
):
    weights, stats, _echo = load_weights(tiny_weights_path)
    operator = FieldOperator.from_weights(weights)
    occupancy = read_container(first_model)
    nu = float(read_sidecar(first_model)["nu"])
    direct = channels_to_fields(predict_grid(operator, stats, occupancy, nu))
    written = predict_to_file(tiny_weights_path, first_model, tmp_path / "p.pft")
    assert np.array_equal(direct, written)


def test_predict_at_a_different_resolution(tiny_weights_path, tmp_path):
    cube = tmp_path / "m12.pft"
    rng = np.random.default_rng(3)
    write_container(cube, (rng.random((12, 12, 12)) > 0.5).astype(np.float32))
    sidecar_path(cube).write_text(json.dumps({"nu": 0.3}))
    fields = predict_to_file(tiny_weights_path, cube, tmp_path / "p12.pft")
    assert fields.shape == (6, 3, 12, 12, 12)
    assert np.all(np.isfinite(fields))


def test_model_container_validation(tiny_weights_path, tmp_path):
    flat = tmp_path / "flat.pft"
    write_container(flat, np.zeros((4, 4)))
    with pytest.raises(ContainerError, match="cubic rank-3"):
        predict_to_file(tiny_weights_path, flat, tmp_path / "out.pft")
    cube = tmp_path / "cube.pft"
    write_container(cube, np.ones((8, 8, 8)))
    with pytest.raises(ContainerError, match="must carry nu"):
        predict_to_file(tiny_weights_path, cube, tmp_path / "out.pft")


def test_archive_round_trip(tiny_result, tmp_path):
    path = tmp_path / "weights.npz"
    save_weights(
        path, tiny_result.weights, tiny_result.stats, TINY_CONFIG,
        extra={"note": "round-trip"},
    )
    assert sidecar_path(path).exists()
    weights, stats, echo = load_weights(path)
    assert echo["note"] == "round-trip"
    assert SurrogateConfig.from_json_dict(echo["config"]) == TINY_CONFIG
    assert np.array_equal(weights.lift_weight, tiny_result.weights.lift_weight)
    assert weights.layer_count == tiny_result.weights.layer_count
    for loaded, original in zip(weights.layers, tiny_result.weights.layers):
        assert np.array_equal(loaded.spectral_re, original.spectral_re)
        assert np.array_equal(loaded.spectral_im, original.spectral_im)
        assert np.array_equal(loaded.pointwise, original.pointwise)
        assert np.array_equal(loaded.bias, original.bias)
    assert np.array_equal(weights.project_weight, tiny_result.weights.project_weight)
    assert np.array_equal(stats.output_mean, tiny_result.stats.output_mean)
    assert np.array_equal(stats.input_std, tiny_result.stats.input_std)


def test_archive_loads_without_sidecar(tiny_result, tmp_path):
    path = tmp_path / "weights.npz"
    save_weights(path, tiny_result.weights, tiny_result.stats, TINY_CONFIG)
    sidecar_path(path).unlink()
    weights, _stats, echo = load_weights(path)
    assert echo == {}
    assert weights.width == tiny_result.weights.width


def test_archive_missing_keys(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, lift_weight=np.zeros((4, 4)))
    with pytest.raises(ValueError, match="missing keys"):
        load_weights(path)
