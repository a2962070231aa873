import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signbow.dataset import (ClassAnnotation, Dataset, Frame, HandObservation, HandTrack, Manifest,
                             Point2, SignSample, load_dataset, read_samples, sample_from_record,
                             sample_to_record, save_dataset, split_by_subject, split_stratified,
                             validate_dataset, validate_sample)
from signbow.exceptions import DataValidationError, ParseError

from conftest import make_sample, make_track


def _manifest(n_classes, k=4):
    return Manifest(n_classes, k, tuple(ClassAnnotation(c, f"c{c}", c % 2 == 1, True)
                                        for c in range(n_classes)))


def _grid_dataset(n_classes, per_class, n_subjects=1, k=4):
    samples = []
    for c in range(n_classes):
        for i in range(per_class):
            samples.append(make_sample(f"c{c}_{i}", 1 + i % n_subjects, c,
                                       right=make_track(np.ones((3, 2)) * i, k=k)))
    return Dataset(_manifest(n_classes, k), samples)


def test_record_round_trip(small_dataset):
    for s in small_dataset.samples[:20]:
        again = sample_from_record(json.loads(json.dumps(sample_to_record(s))), s.n_handshapes)
        assert again == s


def test_frames_view_round_trip(small_dataset):
    s = small_dataset.samples[0]
    again = SignSample.from_frames(s.id, s.subject, s.label, s.frames, s.n_handshapes)
    assert again == s
    fr = s.frames[0]
    assert isinstance(fr, Frame) and isinstance(fr.right, HandObservation)
    assert isinstance(fr.right.pos, Point2)


def test_save_load_round_trip(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path / "s.jsonl", tmp_path / "m.json")
    d = load_dataset(tmp_path / "s.jsonl", tmp_path / "m.json")
    assert len(d) == len(small_dataset)
    assert d.manifest == small_dataset.manifest
    assert all(a == b for a, b in zip(d.samples, small_dataset.samples))


def test_malformed_line_reports_line_number(tmp_path):
    good = sample_to_record(make_sample(right=make_track(np.zeros((2, 2)))))
    path = tmp_path / "s.jsonl"
    path.write_text(json.dumps(good) + "\n" + "{not json\n")
    with pytest.raises(ParseError, match="line 2"):
        read_samples(path, 4)


def test_missing_key_is_parse_error():
    with pytest.raises(ParseError):
        sample_from_record({"id": "x", "frames": []}, 4)


def test_handshape_dimension_mismatch(tmp_path):
    rec = sample_to_record(make_sample(right=make_track(np.zeros((2, 2)), k=4), k=4))
    path = tmp_path / "s.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DataValidationError, match="handshape dim"):
        read_samples(path, 5)


def test_load_rejects_bad_probability_sum(tmp_path):
    hs = np.full((3, 4), 0.3)
    d = Dataset(_manifest(1), [make_sample(right=make_track(np.zeros((3, 2)), hs=hs))])
    save_dataset(d, tmp_path / "s.jsonl", tmp_path / "m.json")
    with pytest.raises(DataValidationError, match="sums to"):
        load_dataset(tmp_path / "s.jsonl", tmp_path / "m.json")


def test_load_rejects_unknown_class(tmp_path):
    d = Dataset(_manifest(1), [make_sample(label=7, right=make_track(np.zeros((3, 2))))])
    save_dataset(d, tmp_path / "s.jsonl", tmp_path / "m.json")
    with pytest.raises(DataValidationError, match="unknown class 7"):
        load_dataset(tmp_path / "s.jsonl", tmp_path / "m.json")


def test_validate_sample_violations():
    s = make_sample(right=make_track(np.zeros((3, 2))))
    assert validate_sample(s, 4) == []
    bad_t = s.replace(t=np.array([0, 2, 2]))
    assert any("strictly increasing" in m for m in validate_sample(bad_t, 4))
    nan_pos = s.replace(right=HandTrack(np.ones(3, bool), np.full((3, 2), np.nan), s.right.hs))
    assert any("position" in m for m in validate_sample(nan_pos, 4))
    assert any("subject" in m for m in validate_sample(s.replace(subject=0), 4))


def test_validate_dataset_duplicate_ids():
    s = make_sample(right=make_track(np.zeros((3, 2))))
    assert any("duplicate id" in m for m in validate_dataset(Dataset(_manifest(1), [s, s])))


def test_split_stratified_counts():
    d = _grid_dataset(64, 50)
    train, test = split_stratified(d, 0.8, seed=0)
    assert len(train) == 2560 and len(test) == 640
    for c in range(64):
        assert np.sum(train.labels == c) == 40 and np.sum(test.labels == c) == 10


def test_split_stratified_half_rounds_up():
    d = _grid_dataset(1, 5)
    train, test = split_stratified(d, 0.5, seed=1)  # 2.5 rounds half up
    assert (len(train), len(test)) == (3, 2)


def test_split_stratified_deterministic_and_disjoint():
    d = _grid_dataset(5, 10)
    a = split_stratified(d, 0.8, 4)
    b = split_stratified(d, 0.8, 4)
    assert [s.id for s in a[0].samples] == [s.id for s in b[0].samples]
    ids_train = {s.id for s in a[0].samples}
    assert ids_train.isdisjoint(s.id for s in a[1].samples)
    assert len(ids_train) + len(a[1]) == len(d)


def test_split_stratified_needs_two_per_class():
    with pytest.raises(DataValidationError, match="class 0"):
        split_stratified(_grid_dataset(2, 1), 0.8, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.floats(0.05, 0.95), st.integers(0, 2 ** 31))
def test_split_stratified_property(n, f, seed):
    d = _grid_dataset(3, n)
    train, test = split_stratified(d, f, seed)
    expected = int(np.floor(f * n + 0.5))
    for c in range(3):
        assert np.sum(train.labels == c) == expected
        assert np.sum(test.labels == c) == n - expected


def test_split_by_subject_counts():
    samples = [make_sample(f"x{i}", 1 + i % 10, i % 64, right=make_track(np.zeros((2, 2))))
               for i in range(3200)]
    d = Dataset(_manifest(64), samples)
    train, test = split_by_subject(d, 3)
    assert (len(train), len(test)) == (2880, 320)
    assert set(test.subjects.tolist()) == {3}


def test_split_by_subject_errors():
    d = _grid_dataset(2, 3, n_subjects=1)
    with pytest.raises(DataValidationError, match="empty training set"):
        split_by_subject(d, 1)
    with pytest.raises(DataValidationError, match="does not occur"):
        split_by_subject(d, 9)


def test_restrict_classes(small_dataset):
    d = small_dataset.restrict_classes([0, 2])
    assert d.manifest.class_ids == [0, 2]
    assert set(d.labels.tolist()) == {0, 2}
