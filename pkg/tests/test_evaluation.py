import json

import numpy as np
import pytest

from signbow.classifier import ModelConfig
from signbow.dataset import Dataset
from signbow.evaluation import (ConfusionMatrix, EvalConfig, confusion_matrix, evaluate_masks,
                                run_seed, run_subject_dependent, run_subject_independent,
                                run_subset, subset_weights, weighted_subset_mean)
from signbow.exceptions import DataValidationError
from signbow.dataset import split_stratified

MODEL = ModelConfig(n_codewords=8)


def test_confusion_matrix_counts():
    cm = confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], num_classes=3)
    assert cm.counts.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 1]]
    assert cm.accuracy == pytest.approx(3 / 5)
    assert cm.pair(0, 1) == 1 and cm.pair(0, 2) == 1
    assert cm.to_csv().splitlines()[0] == "truth,0,1,2"
    with pytest.raises(ValueError):
        confusion_matrix([3], [0], num_classes=3)


def test_confusion_matrix_with_class_ids_and_sum():
    a = confusion_matrix([10, 20], [10, 10], class_ids=[10, 20])
    b = confusion_matrix([20], [20], class_ids=[10, 20])
    s = a + b
    assert s.counts.tolist() == [[1, 0], [1, 1]]
    with pytest.raises(ValueError):
        a + confusion_matrix([0], [0], num_classes=2)


def test_accuracy_is_trace_over_total():
    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 5, 200), rng.integers(0, 5, 200)
    cm = confusion_matrix(t, p, num_classes=5)
    assert cm.accuracy == np.mean(t == p)
    assert cm.counts.sum() == 200


def test_empty_confusion_accuracy_is_nan():
    assert np.isnan(ConfusionMatrix(np.arange(2), np.zeros((2, 2), int)).accuracy)


def test_run_seeds_distinct_and_stable():
    seeds = [run_seed(0, i) for i in range(30)]
    assert len(set(seeds)) == 30
    assert seeds == [run_seed(0, i) for i in range(30)]


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(runs=0)
    with pytest.raises(ValueError):
        EvalConfig(masks=("bogus",))
    assert EvalConfig(masks=("pos-hs",)).masks == ("hs-pos",)


def test_subject_dependent_report(small_dataset):
    cfg = EvalConfig(runs=3, masks=("all", "pos"), model=MODEL)
    rep = run_subject_dependent(small_dataset, cfg)
    r = rep.results["all"]
    assert len(r.accuracies) == 3
    assert r.std == pytest.approx(np.std(r.accuracies))
    assert r.confusion.counts.sum() == sum(rep.test_sizes)
    assert rep.mean("all") > rep.mean("pos") - 0.1
    again = run_subject_dependent(small_dataset, cfg, threads=2)
    assert again.to_json() == rep.to_json()
    assert "wall" not in rep.to_json()
    json.loads(rep.to_json())


def test_subject_independent_report(small_dataset):
    cfg = EvalConfig(runs=2, masks=("all",), model=MODEL)
    rep = run_subject_independent(small_dataset, cfg)
    assert sorted(rep.per_subject) == [1, 2, 3]
    for sub in rep.per_subject.values():
        assert len(sub.results["all"].accuracies) == 2
    assert 0 <= rep.pooled_mean() <= 1
    assert rep.confusion().counts.sum() == 2 * len(small_dataset)
    assert len(rep.table_rows()) == 2


def test_subject_independent_needs_two_subjects(small_dataset):
    one = Dataset(small_dataset.manifest, [s for s in small_dataset.samples if s.subject == 1])
    with pytest.raises(DataValidationError, match="2 subjects"):
        run_subject_independent(one, EvalConfig(runs=1, model=MODEL))


def test_subsets_and_weighted_mean(small_dataset):
    w = subset_weights(small_dataset)
    assert w["one_handed"] + w["two_handed"] == pytest.approx(1.0)
    reps = {s: run_subset(small_dataset, EvalConfig(runs=2, subset=s, model=MODEL))
            for s in ("one_handed", "two_handed")}
    for s, r in reps.items():
        ids = set(r.results["all"].confusion.class_ids.tolist())
        ann = {c.class_id: c for c in small_dataset.manifest.classes}
        assert all(ann[c].one_handed == (s == "one_handed") for c in ids)
    m = weighted_subset_mean(reps, w)
    lo, hi = sorted(r.mean() for r in reps.values())
    assert lo <= m <= hi
    with pytest.raises(ValueError):
        run_subset(small_dataset, EvalConfig(runs=1))


def test_evaluate_masks_single_split(small_dataset):
    train, test = split_stratified(small_dataset, 0.8, 0)
    acc = evaluate_masks(train, test, ["all", "hs"], EvalConfig(model=MODEL))
    assert set(acc) == {"all", "hs"} and all(0 <= v <= 1 for v in acc.values())
