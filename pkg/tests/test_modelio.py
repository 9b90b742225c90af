"""Model JSON serialization for both parameter kinds."""

import numpy as np
import pytest

from xelink.burn import init_burn_params
from xelink.greedy import LinearParams, ModelError
from xelink.modelio import load_model, save_model


def test_burn_round_trip(tmp_path):
    params = init_burn_params("FEAT", hidden=6, seed=4)
    path = tmp_path / "m.json"
    save_model(path, params, "FEAT", train_config={"epochs": 3})
    loaded, feature_set, train_config = load_model(path)
    assert feature_set == "FEAT"
    assert train_config == {"epochs": 3}
    assert loaded.hidden == 6
    assert loaded.leaky_slope == params.leaky_slope
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(loaded.arrays()[name], arr)


def test_linear_round_trip(tmp_path):
    params = LinearParams(w_local=np.array([1.5, -2.0, 0.25, 0.0]), w_pair=np.ones(4))
    path = tmp_path / "m.json"
    save_model(path, params, "FEAT")
    loaded, feature_set, _ = load_model(path)
    assert isinstance(loaded, LinearParams)
    np.testing.assert_array_equal(loaded.w_local, params.w_local)
    np.testing.assert_array_equal(loaded.w_pair, params.w_pair)


def test_save_is_deterministic(tmp_path):
    params = init_burn_params("BASE", hidden=3, seed=1)
    save_model(tmp_path / "a.json", params, "BASE")
    save_model(tmp_path / "b.json", params, "BASE")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_unknown_format_version(tmp_path):
    params = LinearParams(np.ones(1), np.ones(1))
    path = tmp_path / "m.json"
    save_model(path, params, "BASE")
    text = path.read_text().replace('"format_version": 1', '"format_version": 9')
    path.write_text(text)
    with pytest.raises(ModelError, match="format_version"):
        load_model(path)
