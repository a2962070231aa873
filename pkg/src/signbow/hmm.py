"""Sequence-aware baseline: left-to-right HMMs with Gaussian-mixture emissions.

Each class and used hand gets two HMMs, one over the sequence of movement
directions and one over the sequence of handshape probability vectors.
Their per-frame normalized forward log-likelihoods replace the trajectory
and handshape factors of the bag-of-words model; position, amount of
movement, the movement gate, hand usage and the absence rule are kept.

Training runs all HMMs of one (hand, feature) pair in lockstep over a
single padded batch; every sequence carries the index of the model that
owns it, and each model stops independently once converged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .classifier import (ALL, HS, TRAJ, ClassScore, FeatureMask, ModelConfig, SampleFeatures,
                         SignModel, combine, extract_features, factor_tensor, fit_from_features,
                         predict_from_scores, ranked_scores)
from .dataset import HANDS, Dataset, Manifest, SignSample
from .exceptions import DataValidationError, NumericalError
from .handshape import kmeans
from .validation import check_feature_mask, check_samples, resolve_training_input

LOG_2PI = math.log(2 * math.pi)
MONOTONE_TOL = 1e-8
FEATURES = ("trajectory", "handshape")


def allowed_transitions(num_states: int) -> np.ndarray:
    """Boolean support of a left-to-right chain with skips: i->i, i->i+1, i->i+2."""
    i, j = np.indices((num_states, num_states))
    return (j >= i) & (j - i <= 2)


def _lse(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _log_or_none(a):
    return [[None if not np.isfinite(v) else float(v) for v in row] for row in np.atleast_2d(a)]


def _from_log_list(rows):
    return np.array([[-np.inf if v is None else float(v) for v in row] for row in rows])


@dataclass(eq=False)
class LeftRightHMM:
    """Left-to-right HMM with skip transitions and diagonal GMM emissions.

    Attributes
    ----------
    log_initial : ndarray of shape (n_states,)
        All mass on state 0.
    log_transitions : ndarray of shape (n_states, n_states)
        ``-inf`` outside the allowed support.
    weights : ndarray of shape (n_states, n_mix)
    means, variances : ndarray of shape (n_states, n_mix, n_features)
    """

    log_initial: np.ndarray
    log_transitions: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.log_initial)

    @property
    def n_mix(self) -> int:
        return self.weights.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.means.shape[2]

    def log_emission(self, x) -> np.ndarray:
        """Per-frame, per-state log emission density; ``x`` has shape (T, n_features)."""
        x = _check_seq(x, self.feature_dim)
        comp = _log_components(x[None], self.weights[None], self.means[None],
                               self.variances[None])
        return _lse(comp, axis=-1)[0]

    def validate(self, variance_floor: float = 0.0, atol: float = 1e-9):
        s = self.num_states
        if self.log_transitions.shape != (s, s) or self.weights.shape[0] != s:
            raise ValueError("inconsistent state count")
        if np.any(np.isfinite(self.log_transitions[~allowed_transitions(s)])):
            raise ValueError("transition outside the left-to-right support")
        if not np.allclose(np.exp(self.log_transitions).sum(1), 1.0, atol=atol):
            raise ValueError("transition rows must sum to 1")
        if not (self.log_initial[0] == 0.0 and np.all(np.isneginf(self.log_initial[1:]))):
            raise ValueError("initial state must be 0")
        if not np.allclose(self.weights.sum(1), 1.0, atol=atol):
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.variances < variance_floor):
            raise ValueError("variance below floor")
        return self

    def to_dict(self):
        return {"log_initial": _log_or_none(self.log_initial)[0],
                "log_transitions": _log_or_none(self.log_transitions),
                "weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(_from_log_list([obj["log_initial"]])[0], _from_log_list(obj["log_transitions"]),
                   np.asarray(obj["weights"], dtype=float), np.asarray(obj["means"], dtype=float),
                   np.asarray(obj["variances"], dtype=float))


def _check_seq(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected a sequence of {dim}-dimensional vectors, got shape {x.shape}")
    return x


def _log_components(x, weights, means, variances):
    """Log of weight times Gaussian density per (seq, frame, state, component).

    ``x`` is (N, T, D); the parameters carry a leading per-sequence axis.
    """
    diff = x[:, :, None, None, :] - means[:, None]
    maha = (diff ** 2 / variances[:, None]).sum(-1)
    log_norm = -0.5 * (x.shape[-1] * LOG_2PI + np.log(variances).sum(-1))
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return (log_w + log_norm)[:, None] - 0.5 * maha


def _pad(seqs, dim):
    lens = np.array([len(s) for s in seqs], dtype=np.int64)
    x = np.zeros((len(seqs), max(lens.max(initial=0), 1), dim))
    for n, s in enumerate(seqs):
        x[n, :len(s)] = s
    return x, np.arange(x.shape[1])[None, :] < lens[:, None]


def _forward(log_b, log_init, log_a, mask):
    n, t_max, s = log_b.shape
    alpha = np.empty((n, t_max, s))
    a = log_init + log_b[:, 0]
    alpha[:, 0] = a
    for t in range(1, t_max):
        nxt = _lse(a[:, :, None] + log_a, axis=1) + log_b[:, t]
        a = np.where(mask[:, t, None], nxt, a)
        alpha[:, t] = a
    return alpha, _lse(a, axis=1)


def _backward(log_b, log_a, mask):
    n, t_max, s = log_b.shape
    beta = np.zeros((n, t_max, s))
    b = np.zeros((n, s))
    for t in range(t_max - 2, -1, -1):
        nxt = _lse(log_a + (log_b[:, t + 1] + b)[:, None, :], axis=2)
        b = np.where(mask[:, t + 1, None], nxt, 0.0)
        beta[:, t] = b
    return beta


# ------------------------------------------------------------ init & scoring

def init_left_right(num_states: int, feature_dim: int, seed=0, seqs=None, n_mix: int = 1,
                    variance_floor: float = 1e-4) -> LeftRightHMM:
    """Initial model: state 0 start, uniform allowed transitions.

    With training ``seqs``, emissions come from a segmental split: each
    sequence is cut into ``num_states`` equal parts, the frames of part i
    are pooled for state i, and k-means on the pool gives the component
    means, shares and spreads. Without data, means are standard normal
    draws and variances are 1.
    """
    if num_states < 1:
        raise ValueError("num_states must be >= 1")
    if feature_dim <= 0:
        raise ValueError("feature_dim must be positive")
    if not 1 <= n_mix:
        raise ValueError("n_mix must be >= 1")
    allowed = allowed_transitions(num_states)
    with np.errstate(divide="ignore"):
        log_a = np.log(allowed / allowed.sum(1, keepdims=True))
    log_init = np.full(num_states, -np.inf)
    log_init[0] = 0.0
    rng = np.random.default_rng(seed)
    weights = np.full((num_states, n_mix), 1.0 / n_mix)
    means = rng.standard_normal((num_states, n_mix, feature_dim))
    variances = np.ones((num_states, n_mix, feature_dim))
    seqs = [] if seqs is None else [_check_seq(s, feature_dim) for s in seqs if len(s)]
    if seqs:
        pools = [[] for _ in range(num_states)]
        for s in seqs:
            state = np.arange(len(s)) * num_states // len(s)
            for i in range(num_states):
                pools[i].append(s[state == i])
        everything = np.concatenate(seqs)
        for i in range(num_states):
            pool = np.concatenate(pools[i])
            if len(pool) == 0:
                pool = everything
            if len(pool) >= n_mix and n_mix > 1:
                centers, labels, _ = kmeans(pool, n_mix, seed=[*np.atleast_1d(seed), i])
            else:
                centers, labels = np.repeat(pool.mean(0, keepdims=True), n_mix, 0), None
            for m in range(n_mix):
                part = pool if labels is None else pool[labels == m]
                if len(part) == 0:
                    part = pool
                means[i, m] = centers[m]
                variances[i, m] = ((part - centers[m]) ** 2).mean(0)
                weights[i, m] = len(part)
            weights[i] /= weights[i].sum()
    return LeftRightHMM(log_init, log_a, weights, means, np.maximum(variances, variance_floor))


def forward_log_likelihoods(seqs, h: LeftRightHMM) -> np.ndarray:
    """``log P(seq | h)`` for every sequence; empty sequences score 0."""
    seqs = [_check_seq(s, h.feature_dim) if len(s) else np.empty((0, h.feature_dim))
            for s in seqs]
    out = np.zeros(len(seqs))
    keep = [i for i, s in enumerate(seqs) if len(s)]
    if not keep:
        return out
    x, mask = _pad([seqs[i] for i in keep], h.feature_dim)
    log_b = _lse(_log_components(x, h.weights[None], h.means[None], h.variances[None]), -1)
    _, ll = _forward(log_b, h.log_initial[None], h.log_transitions[None], mask)
    out[keep] = ll
    return out


def forward_log_likelihood(seq, h: LeftRightHMM) -> float:
    """Forward-algorithm ``log P(seq | h)`` in log space."""
    seq = _check_seq(seq, h.feature_dim)
    if len(seq) == 0:
        raise ValueError("sequence must be non-empty")
    return float(forward_log_likelihoods([seq], h)[0])


def normalized_log_likelihood(seq, h: LeftRightHMM) -> float:
    """``log P(seq | h) / len(seq)``; 0 for an empty sequence."""
    if len(seq) == 0:
        return 0.0
    return forward_log_likelihood(seq, h) / len(seq)


# ------------------------------------------------------------ training

class _Stack:
    """Parameters of several HMMs with a leading model axis."""

    def __init__(self, models):
        self.log_init = np.stack([m.log_initial for m in models])
        self.log_a = np.stack([m.log_transitions for m in models])
        self.weights = np.stack([m.weights for m in models])
        self.means = np.stack([m.means for m in models])
        self.variances = np.stack([m.variances for m in models])

    def model(self, g) -> LeftRightHMM:
        return LeftRightHMM(self.log_init[g].copy(), self.log_a[g].copy(), self.weights[g].copy(),
                            self.means[g].copy(), self.variances[g].copy())


def _group_sum(values, owner, n_groups):
    out = np.zeros((n_groups,) + values.shape[1:])
    np.add.at(out, owner, values)
    return out


def _em_step(x, mask, owner, st: _Stack, groups, variance_floor):
    """One E-step on the sequences of ``groups``; M-step updates ``st`` in place.

    Returns the per-group total log-likelihood of the parameters before the update.
    """
    n_groups = len(st.log_init)
    comp = _log_components(x, st.weights[owner], st.means[owner], st.variances[owner])
    log_b = _lse(comp, -1)
    log_a = st.log_a[owner]
    alpha, ll = _forward(log_b, st.log_init[owner], log_a, mask)
    beta = _backward(log_b, log_a, mask)
    log_gamma = np.where(mask[:, :, None], alpha + beta - ll[:, None, None], -np.inf)
    resp = np.exp(log_gamma[..., None] + comp - log_b[..., None])   # (N, T, S, M)
    with np.errstate(invalid="ignore"):
        resp = np.where(mask[:, :, None, None], resp, 0.0)

    if x.shape[1] > 1:
        log_xi = (alpha[:, :-1, :, None] + log_a[:, None]
                  + (log_b + beta)[:, 1:, None, :] - ll[:, None, None, None])
        xi = np.where(mask[:, 1:, None, None], np.exp(log_xi), 0.0).sum(1)
        trans = _group_sum(xi, owner, n_groups)
    else:
        trans = np.zeros_like(st.log_a)

    occ = _group_sum(resp.sum(1), owner, n_groups)                       # (G, S, M)
    sx = _group_sum(np.einsum("ntsm,ntd->nsmd", resp, x), owner, n_groups)
    g = np.zeros(n_groups, dtype=bool)
    g[groups] = True

    state_occ = occ.sum(-1, keepdims=True)
    upd_w = g[:, None, None] & (state_occ > 0)
    st.weights = np.where(upd_w, occ / np.where(state_occ > 0, state_occ, 1.0), st.weights)
    upd_m = g[:, None, None] & (occ > 1e-300)
    safe = np.where(occ > 1e-300, occ, 1.0)[..., None]
    st.means = np.where(upd_m[..., None], sx / safe, st.means)
    diff = x[:, :, None, None, :] - st.means[owner][:, None]
    sxx = _group_sum(np.einsum("ntsm,ntsmd->nsmd", resp, diff ** 2), owner, n_groups)
    st.variances = np.where(upd_m[..., None], np.maximum(sxx / safe, variance_floor),
                            st.variances)

    row = trans.sum(-1, keepdims=True)
    upd_a = g[:, None, None] & (row > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        new_a = np.log(trans / np.where(row > 0, row, 1.0))
    allowed = allowed_transitions(st.log_a.shape[1])
    new_a = np.where(allowed, new_a, -np.inf)
    st.log_a = np.where(upd_a, new_a, st.log_a)
    return np.bincount(owner, weights=ll, minlength=n_groups)


def baum_welch_groups(groups: Sequence[Sequence], models: Sequence[LeftRightHMM],
                      max_iter: int = 50, tol: float = 1e-4, variance_floor: float = 1e-4):
    """Fit several independent HMMs, each on its own list of sequences.

    Each model stops after ``max_iter`` updates or once the relative
    log-likelihood improvement falls below ``tol``.

    Returns
    -------
    models : list of LeftRightHMM
    traces : list of list of float
        Total log-likelihood before each update and after the last one.

    Raises
    ------
    NumericalError
        When a trace decreases by more than ``1e-8`` relative.
    """
    if len(groups) != len(models):
        raise ValueError("one sequence list per model is required")
    dim = models[0].feature_dim if models else 0
    seqs, owner = [], []
    for g, group in enumerate(groups):
        group = [_check_seq(s, dim) for s in group]
        kept = [s for s in group if len(s)]
        if not kept:
            raise DataValidationError(f"model {g}: all training sequences are empty")
        seqs += kept
        owner += [g] * len(kept)
    owner = np.asarray(owner, dtype=np.int64)
    x_all, mask_all = _pad(seqs, dim)
    st = _Stack(models)
    # start inside the feasible set so the floored M-step cannot lower the trace
    np.maximum(st.variances, variance_floor, out=st.variances)
    traces = [[] for _ in models]
    active = np.ones(len(models), dtype=bool)
    for it in range(max_iter + 1):
        live = np.flatnonzero(active)
        if len(live) == 0:
            break
        sel = np.flatnonzero(active[owner])
        t_max = int(mask_all[sel].sum(1).max())
        # the E-step of the frozen groups is skipped; only live ones are updated
        updating = live if it < max_iter else np.empty(0, dtype=np.int64)
        before = _Stack.__new__(_Stack)
        before.__dict__ = dict(st.__dict__)
        ll = _em_step(x_all[sel, :t_max], mask_all[sel, :t_max], owner[sel], st, updating,
                      variance_floor)
        for g in live:
            prev = traces[g][-1] if traces[g] else None
            cur = float(ll[g])
            if not np.isfinite(cur):
                raise NumericalError(f"model {g}: non-finite log-likelihood")
            if prev is not None and cur < prev - MONOTONE_TOL * max(1.0, abs(prev)):
                raise NumericalError(
                    f"model {g}: EM log-likelihood decreased from {prev!r} to {cur!r}")
            traces[g].append(cur)
            done = it == max_iter or (prev is not None and cur - prev < tol * abs(prev))
            if done:
                active[g] = False
                # undo the update made after evaluating the final parameters
                for k in ("log_a", "weights", "means", "variances"):
                    getattr(st, k)[g] = getattr(before, k)[g]
    return [st.model(g) for g in range(len(models))], traces


def baum_welch(seqs, h: LeftRightHMM, max_iter: int = 50, tol: float = 1e-4,
               variance_floor: float = 1e-4):
    """EM restricted to the left-to-right support.

    Returns ``(model, trace)``; the trace holds the log-likelihood of every
    visited parameter set and is non-decreasing.
    """
    models, traces = baum_welch_groups([seqs], [h], max_iter, tol, variance_floor)
    return models[0], traces[0]


# ------------------------------------------------------------ backend

@dataclass(frozen=True)
class HMMConfig:
    n_states: int = 4
    n_mix: int = 1
    variance_floor: float = 1e-4
    max_iter: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if not 1 <= self.n_mix <= 3:
            raise ValueError("n_mix must be in 1..3")
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")

    def to_dict(self):
        return {"n_states": self.n_states, "n_mix": self.n_mix,
                "variance_floor": self.variance_floor, "max_iter": self.max_iter, "tol": self.tol}

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@dataclass(frozen=True, eq=False)
class HMMClassModel:
    """Per-hand HMM pair; ``trajectory`` is None when no direction was ever observed."""

    trajectory: LeftRightHMM | None
    handshape: LeftRightHMM

    def to_dict(self):
        return {"trajectory": None if self.trajectory is None else self.trajectory.to_dict(),
                "handshape": self.handshape.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        t = obj["trajectory"]
        return cls(None if t is None else LeftRightHMM.from_dict(t),
                   LeftRightHMM.from_dict(obj["handshape"]))


@dataclass(eq=False)
class HMMSignModel:
    """Bag-of-words model for position, amount and gates plus per-class HMMs."""

    base: SignModel
    hmm_config: HMMConfig
    hmms: dict  # (class_id, hand) -> HMMClassModel

    @property
    def config(self) -> ModelConfig:
        return self.base.config

    @property
    def class_ids(self) -> np.ndarray:
        return self.base.class_ids

    @property
    def handshape_dim(self) -> int:
        return self.base.handshape_dim

    @property
    def classes(self):
        return self.base.classes

    @property
    def manifest(self) -> Manifest:
        return self.base.manifest


def _hmm_sequences(feats, labels, class_id, hand):
    idx = np.flatnonzero(labels == class_id)
    hfs = [feats[i].hand(hand) for i in idx if feats[i].hand(hand).n_present > 0]
    return [f.directions for f in hfs], [f.handshapes for f in hfs]


def fit_hmm_from_features(feats: Sequence[SampleFeatures], labels, manifest: Manifest,
                          config: ModelConfig, hmm_config: HMMConfig = HMMConfig()) -> HMMSignModel:
    """Fit the base model (without a codebook) and one HMM pair per class and used hand."""
    labels = np.asarray(labels)
    base = fit_from_features(feats, labels, manifest, replace(config, hs_quantizer="argmax"))
    hc = hmm_config
    jobs = {f: [] for f in FEATURES}
    for c in base.classes:
        for hi, h in enumerate(HANDS):
            if not c.uses(h):
                continue
            dirs, shapes = _hmm_sequences(feats, labels, c.class_id, h)
            for fi, (feat, seqs, dim) in enumerate((("trajectory", dirs, 2),
                                                    ("handshape", shapes, base.handshape_dim))):
                seqs = [s for s in seqs if len(s)]
                if not seqs:
                    continue
                init = init_left_right(hc.n_states, dim, [config.seed, c.class_id, hi, fi],
                                       seqs, hc.n_mix, hc.variance_floor)
                jobs[feat].append(((c.class_id, h), seqs, init))
    fitted = {}
    for feat, items in jobs.items():
        if not items:
            continue
        models, _ = baum_welch_groups([s for _, s, _ in items], [m for _, _, m in items],
                                      hc.max_iter, hc.tol, hc.variance_floor)
        for (key, _, _), m in zip(items, models):
            fitted[key, feat] = m
    hmms = {}
    for c in base.classes:
        for h in HANDS:
            if c.uses(h):
                hmms[c.class_id, h] = HMMClassModel(fitted.get(((c.class_id, h), "trajectory")),
                                                    fitted[(c.class_id, h), "handshape"])
    return HMMSignModel(base, hc, hmms)


def train_hmm_backend(d: Dataset, config: ModelConfig | None = None,
                      hmm_config: HMMConfig = HMMConfig()) -> HMMSignModel:
    config = config or ModelConfig()
    feats = [extract_features(s, config) for s in d.samples]
    return fit_hmm_from_features(feats, d.labels, d.manifest, config, hmm_config)


def _normalized_batch(seqs, h):
    lens = np.array([len(s) for s in seqs], dtype=float)
    ll = forward_log_likelihoods(seqs, h)
    return np.where(lens > 0, ll / np.maximum(lens, 1), 0.0)


def hmm_factor_tensor(feats: Sequence[SampleFeatures], model: HMMSignModel):
    """As :func:`factor_tensor`, with trajectory and handshape slots from the HMMs."""
    out, impossible = factor_tensor(feats, model.base)
    stack = model.base._stack
    for hi, h in enumerate(HANDS):
        present = np.array([f.hand(h).n_present > 0 for f in feats])
        dirs = [f.hand(h).directions for f in feats]
        shapes = [f.hand(h).handshapes for f in feats]
        for j, c in enumerate(model.classes):
            out[:, hi, TRAJ, j] = 0.0
            out[:, hi, HS, j] = 0.0
            pair = model.hmms.get((c.class_id, h))
            if not c.uses(h) or pair is None:
                continue
            if stack[h].gate[j] and pair.trajectory is not None:
                out[:, hi, TRAJ, j] = np.where(present, _normalized_batch(dirs, pair.trajectory), 0)
            out[:, hi, HS, j] = np.where(present, _normalized_batch(shapes, pair.handshape), 0)
    return out, impossible


def classify_hmm(s: SignSample, model: HMMSignModel, mask: FeatureMask = ALL) -> list[ClassScore]:
    factors, impossible = hmm_factor_tensor([extract_features(s, model.config)], model)
    scores = combine(factors, impossible, mask)
    return ranked_scores(scores[0], impossible[0], model.class_ids)


# ------------------------------------------------------------ estimator

class HMMSignClassifier(ClassifierMixin, BaseEstimator):
    """Sign classifier with HMM trajectory and handshape factors.

    Parameters
    ----------
    n_states : int, default=4
        States of every left-to-right HMM.
    n_mix : int, default=1
        Gaussian components per state (1 to 3).
    variance_floor : float, default=1e-4
    max_iter : int, default=50
        Baum-Welch update cap.
    tol : float, default=1e-4
        Relative log-likelihood improvement below which EM stops.
    n_direction_bins, gate_threshold, presence_fraction, reg_epsilon, sigma_floor, min_displacement
        As in :class:`BagOfWordsSignClassifier`.
    features : str, default="all"
    random_state : int, default=0
    """

    def __init__(self, n_states=4, n_mix=1, variance_floor=1e-4, max_iter=50, tol=1e-4,
                 n_direction_bins=16, gate_threshold=5.0, presence_fraction=0.5,
                 reg_epsilon=1e-4, sigma_floor=0.1, min_displacement=0.2, features="all",
                 random_state=0):
        self.n_states = n_states
        self.n_mix = n_mix
        self.variance_floor = variance_floor
        self.max_iter = max_iter
        self.tol = tol
        self.n_direction_bins = n_direction_bins
        self.gate_threshold = gate_threshold
        self.presence_fraction = presence_fraction
        self.reg_epsilon = reg_epsilon
        self.sigma_floor = sigma_floor
        self.min_displacement = min_displacement
        self.features = features
        self.random_state = random_state

    def fit(self, X, y=None, annotations=None):
        samples, labels, manifest = resolve_training_input(X, y, annotations)
        config = ModelConfig(n_direction_bins=self.n_direction_bins,
                             gate_threshold=self.gate_threshold,
                             presence_fraction=self.presence_fraction,
                             reg_epsilon=self.reg_epsilon, sigma_floor=self.sigma_floor,
                             min_displacement=self.min_displacement, hs_quantizer="argmax",
                             seed=self.random_state)
        hc = HMMConfig(self.n_states, self.n_mix, self.variance_floor, self.max_iter, self.tol)
        check_feature_mask(self.features)
        feats = [extract_features(s, config) for s in samples]
        self.model_ = fit_hmm_from_features(feats, labels, manifest, config, hc)
        self.classes_ = self.model_.class_ids
        return self

    def decision_function(self, X, features=None):
        check_is_fitted(self, "model_")
        samples = check_samples(X, self.model_.handshape_dim)
        mask = check_feature_mask(self.features if features is None else features)
        factors, impossible = hmm_factor_tensor(
            [extract_features(s, self.model_.config) for s in samples], self.model_)
        return combine(factors, impossible, mask)

    def predict(self, X):
        return predict_from_scores(self.decision_function(X), self.classes_)

    def classify(self, sample: SignSample, features=None) -> list[ClassScore]:
        check_is_fitted(self, "model_")
        mask = check_feature_mask(self.features if features is None else features)
        return classify_hmm(check_samples(sample, self.model_.handshape_dim)[0], self.model_, mask)

    def score(self, X, y=None, sample_weight=None):
        samples = check_samples(X, None)
        y = [s.label for s in samples] if y is None else y
        return super().score(samples, y, sample_weight)

    @classmethod
    def from_model(cls, model: HMMSignModel, features="all") -> "HMMSignClassifier":
        hc, cfg = model.hmm_config, model.config
        est = cls(hc.n_states, hc.n_mix, hc.variance_floor, hc.max_iter, hc.tol,
                  cfg.n_direction_bins, cfg.gate_threshold, cfg.presence_fraction,
                  cfg.reg_epsilon, cfg.sigma_floor, cfg.min_displacement, features, cfg.seed)
        est.model_ = model
        est.classes_ = model.class_ids
        return est
