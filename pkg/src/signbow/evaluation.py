"""Evaluation protocols: repeated stratified splits, held-out subjects, class subsets.

Every run derives its seed from ``(seed, run_index)`` through
:class:`numpy.random.SeedSequence`, runs may execute on a thread pool, and
results are collected in run order, so a report depends only on the data
and the configuration. Wall-clock time is kept on the report object but
left out of its JSON form for the same reason.
"""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .classifier import (FeatureMask, ModelConfig, combine, extract_features, factor_tensor,
                         fit_from_features, predict_from_scores)
from .dataset import Dataset, split_by_subject, split_stratified
from .exceptions import DataValidationError
from .hmm import HMMConfig, HMMSignModel, fit_hmm_from_features, hmm_factor_tensor

SUBSETS = ("all", "one_handed", "two_handed")
BACKENDS = ("bow", "hmm")


@dataclass(frozen=True)
class EvalConfig:
    runs: int = 30
    train_fraction: float = 0.8
    seed: int = 0
    masks: tuple = ("all",)
    backend: str = "bow"
    subset: str = "all"
    model: ModelConfig = field(default_factory=ModelConfig)
    hmm: HMMConfig = field(default_factory=HMMConfig)

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if not self.masks:
            raise ValueError("at least one feature mask is required")
        object.__setattr__(self, "masks", tuple(FeatureMask.parse(m).name if isinstance(m, str)
                                                else m.name for m in self.masks))
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.subset not in SUBSETS:
            raise ValueError(f"subset must be one of {SUBSETS}")

    def to_dict(self):
        return {"runs": self.runs, "train_fraction": self.train_fraction, "seed": self.seed,
                "masks": list(self.masks), "backend": self.backend, "subset": self.subset,
                "model": self.model.to_dict(), "hmm": self.hmm.to_dict()}


@dataclass
class ConfusionMatrix:
    """Counts with rows indexed by true class and columns by predicted class."""

    class_ids: np.ndarray
    counts: np.ndarray

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")

    def pair(self, a, b) -> int:
        """Mutual confusion between classes ``a`` and ``b`` (both directions)."""
        ids = list(self.class_ids)
        i, j = ids.index(a), ids.index(b)
        return int(self.counts[i, j] + self.counts[j, i])

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if not np.array_equal(self.class_ids, other.class_ids):
            raise ValueError("confusion matrices over different classes")
        return ConfusionMatrix(self.class_ids, self.counts + other.counts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth"] + [int(c) for c in self.class_ids])
        for c, row in zip(self.class_ids, self.counts):
            w.writerow([int(c)] + [int(v) for v in row])
        return buf.getvalue()


def confusion_matrix(truths, predictions, num_classes: int | None = None,
                     class_ids=None) -> ConfusionMatrix:
    """Tally (truth, prediction) pairs.

    Labels must lie in ``range(num_classes)`` unless explicit ``class_ids``
    are given.
    """
    truths, predictions = np.asarray(truths, dtype=np.int64), np.asarray(predictions, dtype=np.int64)
    if truths.shape != predictions.shape:
        raise ValueError("truths and predictions differ in length")
    if class_ids is None:
        if num_classes is None:
            raise ValueError("num_classes or class_ids is required")
        class_ids = np.arange(num_classes)
    class_ids = np.asarray(class_ids, dtype=np.int64)
    index = {int(c): i for i, c in enumerate(class_ids)}
    counts = np.zeros((len(class_ids), len(class_ids)), dtype=np.int64)
    for t, p in zip(truths.tolist(), predictions.tolist()):
        if t not in index or p not in index:
            raise ValueError(f"label out of range: ({t}, {p})")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(class_ids, counts)


@dataclass
class MaskResult:
    accuracies: list[float]
    confusion: ConfusionMatrix

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))  # population sigma over runs


@dataclass
class EvalReport:
    protocol: str
    config: EvalConfig
    results: dict  # mask name -> MaskResult
    deterministic_runs: bool = False
    test_sizes: list = field(default_factory=list)
    wall_clock: float = 0.0

    def mean(self, mask="all") -> float:
        return self.results[FeatureMask.parse(mask).name].mean

    def std(self, mask="all") -> float:
        return self.results[FeatureMask.parse(mask).name].std

    def to_dict(self):
        return {"protocol": self.protocol, "config": self.config.to_dict(),
                "deterministic_runs": self.deterministic_runs,
                "test_sizes": list(self.test_sizes),
                "class_ids": [int(c) for c in next(iter(self.results.values())).confusion.class_ids],
                "masks": {name: {"mean": r.mean, "std": r.std, "accuracies": r.accuracies,
                                 "confusion": r.confusion.counts.tolist()}
                          for name, r in self.results.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def table_rows(self) -> list[str]:
        return [f"{name:8s} {100 * r.mean:6.2f} ± {100 * r.std:5.2f}"
                for name, r in self.results.items()]


# ------------------------------------------------------------ runs

def run_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def _seed_free(cfg: EvalConfig) -> bool:
    """True when no fitted component of the backend depends on the seed."""
    if cfg.backend == "hmm":
        return cfg.hmm.n_mix == 1
    return cfg.model.hs_quantizer == "argmax"


def fit_backend(feats, labels, manifest, cfg: EvalConfig, seed: int):
    model_cfg = replace(cfg.model, seed=seed)
    if cfg.backend == "hmm":
        return fit_hmm_from_features(feats, labels, manifest, model_cfg, cfg.hmm)
    return fit_from_features(feats, labels, manifest, model_cfg)


def backend_factors(feats, model):
    if isinstance(model, HMMSignModel):
        return hmm_factor_tensor(feats, model)
    return factor_tensor(feats, model)


def _evaluate_split(train: Dataset, test: Dataset, cfg: EvalConfig, seed: int):
    feats_tr = [extract_features(s, cfg.model) for s in train.samples]
    model = fit_backend(feats_tr, train.labels, train.manifest, cfg, seed)
    feats_te = [extract_features(s, cfg.model) for s in test.samples]
    factors, impossible = backend_factors(feats_te, model)
    preds = {m: predict_from_scores(combine(factors, impossible, FeatureMask.parse(m)),
                                    model.class_ids)
             for m in cfg.masks}
    return test.labels, preds


def _map_ordered(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _collect(protocol, cfg, outcomes, class_ids, deterministic, started) -> EvalReport:
    results = {}
    for m in cfg.masks:
        accs, conf = [], None
        for truth, preds in outcomes:
            cm = confusion_matrix(truth, preds[m], class_ids=class_ids)
            accs.append(cm.accuracy)
            conf = cm if conf is None else conf + cm
        results[m] = MaskResult(accs, conf)
    return EvalReport(protocol, cfg, results, deterministic, [len(t) for t, _ in outcomes],
                      time.perf_counter() - started)


def run_subject_dependent(d: Dataset, cfg: EvalConfig, threads: int = 1) -> EvalReport:
    """Repeated stratified ``train_fraction`` splits, one fit per run, every mask scored."""
    started = time.perf_counter()
    d = _apply_subset(d, cfg.subset)

    def one(i):
        s = run_seed(cfg.seed, i)
        train, test = split_stratified(d, cfg.train_fraction, s)
        return _evaluate_split(train, test, cfg, s)

    outcomes = _map_ordered(one, list(range(cfg.runs)), threads)
    return _collect("subject_dependent", cfg, outcomes, d.manifest.class_ids, False, started)


@dataclass
class SubjectIndependentReport:
    config: EvalConfig
    per_subject: dict  # subject -> EvalReport
    wall_clock: float = 0.0

    def pooled_mean(self, mask="all") -> float:
        """Unweighted mean over held-out subjects of their mean accuracy."""
        name = FeatureMask.parse(mask).name
        return float(np.mean([r.results[name].mean for r in self.per_subject.values()]))

    def to_dict(self):
        return {"protocol": "subject_independent", "config": self.config.to_dict(),
                "subjects": {str(s): r.to_dict() for s, r in self.per_subject.items()},
                "pooled_mean": {m: self.pooled_mean(m) for m in self.config.masks}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def table_rows(self) -> list[str]:
        subjects = list(self.per_subject)
        rows = ["mask     " + " ".join(f"{s:>6}" for s in subjects) + "   mean"]
        for m in self.config.masks:
            vals = " ".join(f"{100 * self.per_subject[s].results[m].mean:6.2f}" for s in subjects)
            rows.append(f"{m:8s} {vals} {100 * self.pooled_mean(m):6.2f}")
        return rows

    def confusion(self, mask="all") -> ConfusionMatrix:
        name = FeatureMask.parse(mask).name
        mats = [r.results[name].confusion for r in self.per_subject.values()]
        out = mats[0]
        for m in mats[1:]:
            out = out + m
        return out


def run_subject_independent(d: Dataset, cfg: EvalConfig, threads: int = 1) -> SubjectIndependentReport:
    """Hold out each subject in turn; ``cfg.runs`` reseeded fits per subject.

    When no fitted component depends on the seed the runs are identical, so
    one fit is replicated and the report flags ``deterministic_runs``.
    """
    started = time.perf_counter()
    d = _apply_subset(d, cfg.subset)
    subjects = sorted(set(d.subjects.tolist()))
    if len(subjects) < 2:
        raise DataValidationError("subject-independent evaluation needs at least 2 subjects")
    deterministic = _seed_free(cfg)
    n_fits = 1 if deterministic else cfg.runs
    jobs = [(subj, i) for subj in subjects for i in range(n_fits)]

    def one(job):
        subj, i = job
        train, test = split_by_subject(d, subj)
        return _evaluate_split(train, test, cfg, run_seed(cfg.seed, i))

    outcomes = _map_ordered(one, jobs, threads)
    per_subject = {}
    for k, subj in enumerate(subjects):
        mine = outcomes[k * n_fits:(k + 1) * n_fits]
        if deterministic:
            mine = mine * cfg.runs
        per_subject[subj] = _collect("held_out_subject", cfg, mine, d.manifest.class_ids,
                                     deterministic, started)
    return SubjectIndependentReport(cfg, per_subject, time.perf_counter() - started)


# ------------------------------------------------------------ subsets

def _apply_subset(d: Dataset, subset: str) -> Dataset:
    if subset == "all":
        return d
    one = subset == "one_handed"
    keep = [c.class_id for c in d.manifest.classes if c.one_handed == one]
    if not keep:
        raise DataValidationError(f"no {subset.replace('_', '-')} classes in the dataset")
    return d.restrict_classes(keep)


def run_subset(d: Dataset, cfg: EvalConfig, threads: int = 1) -> EvalReport:
    """Subject-dependent protocol on the one-handed or two-handed classes only."""
    if cfg.subset == "all":
        raise ValueError("run_subset needs subset 'one_handed' or 'two_handed'")
    return run_subject_dependent(d, cfg, threads)


def subset_weights(d: Dataset) -> dict:
    """Share of samples belonging to one-handed and two-handed classes."""
    one = {c.class_id for c in d.manifest.classes if c.one_handed}
    n_one = sum(int(y) in one for y in d.labels.tolist())
    return {"one_handed": n_one / len(d), "two_handed": 1 - n_one / len(d)}


def weighted_subset_mean(reports: dict, weights: dict, mask="all") -> float:
    """Mean accuracy of subset reports weighted by each subset's share of samples."""
    total = sum(weights[k] for k in reports)
    return float(sum(weights[k] * r.mean(mask) for k, r in reports.items()) / total)


def evaluate_masks(d_train: Dataset, d_test: Dataset, masks: Sequence[str], cfg: EvalConfig):
    """Single split convenience: mapping mask -> accuracy."""
    truth, preds = _evaluate_split(d_train, d_test, replace(cfg, masks=tuple(masks)), cfg.seed)
    return {m: float(np.mean(preds[FeatureMask.parse(m).name] == truth)) for m in masks}
