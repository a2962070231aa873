from dataclasses import replace

import numpy as np
import pytest

from signbow.classifier import ModelConfig, train
from signbow.dataset import validate_dataset
from signbow.movement import amount_of_movement
from signbow.synth import (GATE_THRESHOLD, GeneratorConfig, SeparationError, factorial_prototypes,
                           generate_dataset, load_prototypes, make_twin, oracle_accuracy,
                           sample_prototypes, save_prototypes)


def test_default_counts(default_prototypes, default_dataset):
    assert len(default_prototypes) == 64
    assert sum(not p.uses_left for p in default_prototypes) == 42
    assert all(p.uses_right for p in default_prototypes)
    assert sum(p.gated for p in default_prototypes) == 13
    assert len(default_dataset) == 3200
    assert sorted(set(default_dataset.subjects.tolist())) == list(range(1, 11))
    assert validate_dataset(default_dataset) == []


def test_low_movement_share_of_ten_classes():
    protos = sample_prototypes(GeneratorConfig(num_classes=10, seed=4))
    assert sum(p.gated for p in protos) == 2


def test_generation_is_deterministic(small_config, small_prototypes, small_dataset):
    again = generate_dataset(sample_prototypes(small_config), small_config)
    assert all(a == b for a, b in zip(again.samples, small_dataset.samples))
    other = generate_dataset(small_prototypes, replace(small_config, seed=99))
    assert any(a != b for a, b in zip(other.samples, small_dataset.samples))


def test_prototypes_are_separated(default_prototypes, default_config):
    keys = np.array([np.concatenate([p.right.fp_mean, p.right.lp_mean])
                     for p in default_prototypes])
    d = np.linalg.norm(keys[:, None] - keys[None], axis=-1)
    d[np.diag_indices(len(keys))] = np.inf
    assert d.min() >= default_config.min_separation


def test_separation_failure_is_reported():
    cfg = GeneratorConfig(num_classes=200, min_separation=60.0)
    with pytest.raises(SeparationError, match="best separation"):
        sample_prototypes(cfg, max_tries=5)


def test_noise_free_data_is_perfectly_separable():
    cfg = GeneratorConfig(num_classes=12, num_subjects=2, reps_per_subject=3, seed=1,
                          pos_noise=0.0, end_jitter=0.0, subject_offset_scale=0.0, hs_noise=0.0)
    protos = sample_prototypes(cfg)
    assert oracle_accuracy(protos, generate_dataset(protos, cfg)) == 1.0


def test_amounts_follow_prototype(small_prototypes, small_dataset):
    for p in small_prototypes[:4]:
        a = [amount_of_movement(s.right.positions) for s in small_dataset.samples
             if s.label == p.class_id]
        se = p.right.amount_noise / np.sqrt(len(a))
        assert abs(np.mean(a) - p.right.amount_mean) < 4 * se + 0.05


def test_fitted_gates_match_prototypes(default_prototypes, default_dataset):
    model = train(default_dataset, ModelConfig(hs_quantizer="argmax"))
    for p, c in zip(default_prototypes, model.classes):
        for h in ("left", "right"):
            hp = p.hand(h)
            if hp is not None:
                assert c.hand(h).gate.active == (hp.amount_mean > GATE_THRESHOLD)


def test_unused_hand_is_sometimes_clutter(small_prototypes, small_dataset):
    one_handed = {p.class_id for p in small_prototypes if not p.uses_left}
    lefts = [s.left.n_present for s in small_dataset.samples if s.label in one_handed]
    assert any(n == 0 for n in lefts) and any(n > 0 for n in lefts)


def test_factorial_design():
    cfg = GeneratorConfig(num_subjects=2, reps_per_subject=3)
    protos = factorial_prototypes(cfg)
    assert len(protos) == 27
    assert all(p.uses_right and not p.uses_left for p in protos)
    assert all(np.array_equal(p.right.fp_mean, p.right.lp_mean) for p in protos)
    d = generate_dataset(protos, cfg)
    assert validate_dataset(d) == []
    # closed walks end near where they start
    gaps = [np.linalg.norm(s.right.positions[-1] - s.right.positions[0]) for s in d.samples]
    assert np.median(gaps) < 3 * cfg.end_jitter * np.sqrt(2)


def test_twin_shares_position_and_movement(small_prototypes):
    twins = make_twin(small_prototypes, 1, 2)
    a, b = twins[1].right, twins[2].right
    assert twins[2].class_id == small_prototypes[2].class_id
    assert np.array_equal(a.fp_mean, b.fp_mean) and np.array_equal(a.lp_mean, b.lp_mean)
    assert np.array_equal(a.direction_profile, b.direction_profile)
    assert np.argmax(a.handshape_profile) != np.argmax(b.handshape_profile)
    assert twins[1] is small_prototypes[1]


def test_prototype_file_round_trip(tmp_path, small_prototypes, small_config):
    save_prototypes(small_prototypes, small_config, tmp_path / "p.json")
    protos, cfg = load_prototypes(tmp_path / "p.json")
    assert cfg == small_config
    for a, b in zip(protos, small_prototypes):
        assert a.to_dict() == b.to_dict()


def test_config_validation():
    with pytest.raises(ValueError):
        GeneratorConfig(hs_noise=0.6)
    with pytest.raises(ValueError):
        GeneratorConfig(frames=(5, 3))
