"""Config schema validation, canonical hashing, and seed derivation."""

import json

import pytest

from bitrans.config import (ConfigError, ExperimentConfig, config_hash,
                            split_seed)


def _regress_doc(**over):
    doc = {
        "experiment_id": "demo/regress",
        "kind": "regress_1d",
        "methods": ["mlp", "bilinear_transduction"],
        "seeds": [0, 1, 2],
        "function": {"tag": "sawtooth", "amplitude": 1.0, "period": 5.0},
        "ranges": {"train": [[[20, 40]]], "test": [[[10, 20], [40, 50]]]},
        "data": {"n_train": 100, "n_test": 50, "noise": 0.0},
    }
    doc.update(over)
    return doc


def test_valid_config_parses():
    cfg = ExperimentConfig.from_dict(_regress_doc())
    assert cfg.kind == "regress_1d"
    assert cfg.arch["units"] == 128  # desk default
    assert cfg.optimizer["batch"] == 32


def test_unknown_top_level_field_named_in_error():
    with pytest.raises(ConfigError, match="bogus"):
        ExperimentConfig.from_dict(_regress_doc(bogus=1))


def test_unknown_nested_field_named_in_error():
    with pytest.raises(ConfigError, match="warmup"):
        ExperimentConfig.from_dict(_regress_doc(optimizer={"lr": 1e-3,
                                                           "warmup": 10}))


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError, match="kind"):
        ExperimentConfig.from_dict(_regress_doc(kind="classify"))


def test_unknown_method_rejected():
    with pytest.raises(ConfigError, match="method"):
        ExperimentConfig.from_dict(_regress_doc(methods=["svm"]))


def test_missing_required_field_named():
    doc = _regress_doc()
    del doc["experiment_id"]
    with pytest.raises(ConfigError, match="experiment_id"):
        ExperimentConfig.from_dict(doc)


def test_hash_stable_and_key_order_independent():
    a = _regress_doc()
    b = json.loads(json.dumps(a))
    # reorder keys
    b = {k: b[k] for k in reversed(list(b))}
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 16
    assert ExperimentConfig.from_dict(a).hash() == ExperimentConfig.from_dict(b).hash()


def test_hash_changes_with_content():
    a = _regress_doc()
    b = _regress_doc(seeds=[0, 1, 3])
    assert config_hash(a) != config_hash(b)


def test_roundtrip_to_dict():
    cfg = ExperimentConfig.from_dict(_regress_doc())
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.hash() == cfg.hash()


def test_load_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(_regress_doc()))
    cfg = ExperimentConfig.load(path)
    assert cfg.experiment_id == "demo/regress"


def test_split_seed_deterministic():
    assert split_seed(0, "a") == split_seed(0, "a")
    assert split_seed(0, "a") != split_seed(1, "a")


def test_split_seed_nonnegative_63_bit():
    s = split_seed(12345, "label")
    assert 0 <= s < 2 ** 63


def test_split_seed_no_collisions_over_many_labels():
    seen = {split_seed(0, f"label:{i}") for i in range(10_000)}
    assert len(seen) == 10_000
