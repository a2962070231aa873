import json

import numpy as np
import pytest

from signbow.classifier import ModelConfig, score_samples, train
from signbow.exceptions import ModelFormatError
from signbow.hmm import HMMConfig, HMMSignModel, hmm_factor_tensor, train_hmm_backend
from signbow.classifier import extract_features
from signbow.model_io import FORMAT_VERSION, load_model, model_to_dict, save_model


def test_bow_round_trip_scores_identical(tmp_path, small_dataset):
    m = train(small_dataset, ModelConfig(n_codewords=8))
    save_model(m, tmp_path / "m.json")
    again = load_model(tmp_path / "m.json")
    a, ia = score_samples(small_dataset.samples, m)
    b, ib = score_samples(small_dataset.samples, again)
    assert np.array_equal(a, b) and np.array_equal(ia, ib)
    assert again.config == m.config


def test_hmm_round_trip_scores_identical(tmp_path, small_dataset):
    m = train_hmm_backend(small_dataset, ModelConfig(), HMMConfig(n_states=2, max_iter=3))
    save_model(m, tmp_path / "h.json")
    again = load_model(tmp_path / "h.json")
    assert isinstance(again, HMMSignModel) and again.hmm_config == m.hmm_config
    feats = [extract_features(s, m.config) for s in small_dataset.samples[:30]]
    assert np.array_equal(hmm_factor_tensor(feats, m)[0], hmm_factor_tensor(feats, again)[0])


def test_serialized_form_is_plain_json(small_dataset):
    m = train(small_dataset, ModelConfig(n_codewords=8))
    text = json.dumps(model_to_dict(m), allow_nan=False)
    assert json.loads(text)["format_version"] == FORMAT_VERSION


def test_truncated_file_reports_offset(tmp_path, small_dataset):
    m = train(small_dataset, ModelConfig(n_codewords=8))
    save_model(m, tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "m.json").write_text(text[:500])
    with pytest.raises(ModelFormatError, match="offset"):
        load_model(tmp_path / "m.json")


def test_version_mismatch(tmp_path, small_dataset):
    obj = model_to_dict(train(small_dataset, ModelConfig(n_codewords=8)))
    obj["format_version"] = FORMAT_VERSION + 1
    (tmp_path / "m.json").write_text(json.dumps(obj))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(tmp_path / "m.json")


def test_missing_field(tmp_path, small_dataset):
    obj = model_to_dict(train(small_dataset, ModelConfig(n_codewords=8)))
    del obj["classes"][0]["name"]
    (tmp_path / "m.json").write_text(json.dumps(obj))
    with pytest.raises(ModelFormatError, match="malformed"):
        load_model(tmp_path / "m.json")
