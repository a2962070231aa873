"""Sequence-agnostic sign classifier.

Each class keeps, per used hand, a position model (first/last position
Gaussians), a movement model (amount Gaussian plus a gated distribution of
directions) and a handshape model (codeword distribution). A sample's score
for a class is the sum of the enabled log-factors over the hands the class
uses; a class whose used hand is missing from the sample scores ``-inf``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import HANDS, ClassAnnotation, Dataset, Manifest, SignSample
from .exceptions import DataValidationError, NumericalError
from .handshape import (HandshapeClassModel, HandshapeCodebook, fit_codebook,
                        handshape_log_prob, quantize_argmax,
                        quantize_handshapes)
from .movement import (HALF_LOG_2PI, AmountModel, MovementGate, TrajectoryClassModel,
                       amount_of_movement, compute_movement_gate,
                       extract_directions, fit_amount_model, movement_log_prob,
                       quantize_directions, smoothed_categorical)
from .position import LOG_2PI, MIN_DET, PositionClassModel, fit_position_model, position_log_prob
from .validation import check_feature_mask, check_samples, resolve_training_input

# factor slots of the per-sample score tensor
POS, AMOUNT, TRAJ, HS = range(4)


@dataclass(frozen=True)
class FeatureMask:
    use_position: bool = True
    use_movement: bool = True
    use_handshape: bool = True

    def __post_init__(self):
        if not (self.use_position or self.use_movement or self.use_handshape):
            raise ValueError("a feature mask must enable at least one feature")

    @classmethod
    def parse(cls, name: str) -> "FeatureMask":
        name = name.strip().lower()
        if name == "all":
            return cls()
        parts = set(name.split("-"))
        unknown = parts - {"pos", "mov", "hs"}
        if unknown or not parts:
            raise ValueError(f"unknown feature mask {name!r}")
        return cls("pos" in parts, "mov" in parts, "hs" in parts)

    @property
    def name(self) -> str:
        if self.use_position and self.use_movement and self.use_handshape:
            return "all"
        parts = [p for p, on in (("hs", self.use_handshape), ("pos", self.use_position),
                                 ("mov", self.use_movement)) if on]
        # match the conventional column names: hs-pos, hs-mov, pos-mov
        return "-".join(parts)

    @property
    def factors(self) -> list[int]:
        out = []
        if self.use_position:
            out.append(POS)
        if self.use_movement:
            out += [AMOUNT, TRAJ]
        if self.use_handshape:
            out.append(HS)
        return out


ALL = FeatureMask()
TABLE_MASKS = ("all", "hs", "mov", "pos", "hs-pos", "hs-mov", "pos-mov")


@dataclass(frozen=True)
class ModelConfig:
    n_direction_bins: int = 16
    n_codewords: int = 32
    alpha: float = 1.0
    gate_threshold: float = 5.0
    presence_fraction: float = 0.5
    reg_epsilon: float = 1e-4
    sigma_floor: float = 0.1
    min_displacement: float = 0.2
    hs_quantizer: str = "codebook"
    seed: int = 0

    def __post_init__(self):
        if self.n_direction_bins < 2:
            raise ValueError("n_direction_bins must be >= 2")
        if self.n_codewords < 1:
            raise ValueError("n_codewords must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.presence_fraction < 1:
            raise ValueError("presence_fraction must be in [0, 1)")
        if self.hs_quantizer not in ("codebook", "argmax"):
            raise ValueError("hs_quantizer must be 'codebook' or 'argmax'")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@dataclass(frozen=True)
class HandClassModel:
    position: PositionClassModel
    amount: AmountModel
    trajectory: TrajectoryClassModel
    handshape: HandshapeClassModel
    gate: MovementGate
    n_samples: int = 0

    def to_dict(self):
        return {"n_samples": self.n_samples,
                "position": self.position.to_dict(),
                "amount": self.amount.to_dict(),
                "trajectory": self.trajectory.to_dict(),
                "handshape": self.handshape.to_dict(),
                "gate_active": self.gate.active}

    @classmethod
    def from_dict(cls, obj):
        return cls(PositionClassModel.from_dict(obj["position"]),
                   AmountModel.from_dict(obj["amount"]),
                   TrajectoryClassModel.from_dict(obj["trajectory"]),
                   HandshapeClassModel.from_dict(obj["handshape"]),
                   MovementGate(bool(obj["gate_active"])),
                   int(obj.get("n_samples", 0)))


@dataclass(frozen=True)
class ClassModel:
    class_id: int
    name: str
    uses_left: bool
    uses_right: bool
    left: HandClassModel | None = None
    right: HandClassModel | None = None
    n_samples: int = 0

    def uses(self, hand: str) -> bool:
        return self.uses_left if hand == "left" else self.uses_right

    def hand(self, hand: str) -> HandClassModel | None:
        return self.left if hand == "left" else self.right


@dataclass(eq=False)
class SignModel:
    config: ModelConfig
    handshape_dim: int
    codebook: HandshapeCodebook | None
    classes: tuple[ClassModel, ...]

    @property
    def class_ids(self) -> np.ndarray:
        return np.array([c.class_id for c in self.classes])

    @property
    def n_codewords(self) -> int:
        return self.handshape_dim if self.codebook is None else self.codebook.size

    @property
    def manifest(self) -> Manifest:
        return Manifest(len(self.classes), self.handshape_dim, tuple(
            ClassAnnotation(c.class_id, c.name, c.uses_left, c.uses_right) for c in self.classes))

    def quantize(self, frames) -> np.ndarray:
        if len(frames) == 0:
            return np.empty(0, dtype=np.int64)
        if self.codebook is None:
            return quantize_argmax(frames)
        return quantize_handshapes(frames, self.codebook)

    @cached_property
    def _stack(self) -> dict:
        return {h: _HandStack.build(self, h) for h in HANDS}


class ClassScore(NamedTuple):
    class_id: int
    log_score: float
    impossible: bool


# ------------------------------------------------------------ features

@dataclass(frozen=True, eq=False)
class HandFeatures:
    n_present: int
    first: np.ndarray | None
    last: np.ndarray | None
    amount: float
    directions: np.ndarray
    direction_bins: np.ndarray
    handshapes: np.ndarray


@dataclass(frozen=True, eq=False)
class SampleFeatures:
    n_frames: int
    left: HandFeatures
    right: HandFeatures

    def hand(self, h: str) -> HandFeatures:
        return self.left if h == "left" else self.right


def _hand_features(track, n_bins, min_displacement) -> HandFeatures:
    p = track.positions
    if len(p) == 0:
        return HandFeatures(0, None, None, float("nan"), np.empty((0, 2)),
                            np.empty(0, dtype=np.int64), track.handshapes)
    dirs = extract_directions(p, min_displacement)
    return HandFeatures(len(p), p[0], p[-1], amount_of_movement(p), dirs,
                        quantize_directions(dirs, n_bins), track.handshapes)


def extract_features(sample: SignSample, config: ModelConfig) -> SampleFeatures:
    """Order-free per-hand views of a sample; positions use present frames only."""
    nb, md = config.n_direction_bins, config.min_displacement
    return SampleFeatures(sample.n_frames, _hand_features(sample.left, nb, md),
                          _hand_features(sample.right, nb, md))


def _is_present(n_present: int, n_frames: int, fraction: float) -> bool:
    return n_present > fraction * n_frames


def hand_presence(s: SignSample, hand: str, fraction: float = 0.5) -> bool:
    """True iff the hand is detected in strictly more than ``fraction`` of frames."""
    return _is_present(s.hand(hand).n_present, s.n_frames, fraction)


# ------------------------------------------------------------ training

def _codeword_lists(feats: Sequence[SampleFeatures], hand: str, model: SignModel) -> list[np.ndarray]:
    frames = [f.hand(hand).handshapes for f in feats]
    sizes = [len(x) for x in frames]
    if sum(sizes) == 0:
        return [np.empty(0, dtype=np.int64) for _ in frames]
    codes = model.quantize(np.concatenate([x for x in frames if len(x)]))
    return np.split(codes, np.cumsum(sizes)[:-1])


def fit_from_features(feats: Sequence[SampleFeatures], labels, manifest: Manifest,
                      config: ModelConfig) -> SignModel:
    labels = np.asarray(labels)
    ann = {c.class_id: c for c in manifest.classes}
    for c in manifest.class_ids:
        n = int(np.count_nonzero(labels == c))
        if n < 2:
            raise DataValidationError(f"class {c} has {n} training samples; need at least 2")
    unknown = set(labels.tolist()) - set(ann)
    if unknown:
        raise DataValidationError(f"training labels not in manifest: {sorted(unknown)}")

    codebook = None
    if config.hs_quantizer == "codebook":
        pool = [f.hand(h).handshapes for f, y in zip(feats, labels)
                for h in HANDS if ann[int(y)].uses(h) and f.hand(h).n_present]
        pool = np.concatenate(pool) if pool else np.empty((0, manifest.handshape_dim))
        if len(pool) < config.n_codewords:
            raise DataValidationError(
                f"{len(pool)} handshape frames available; need >= {config.n_codewords} codewords")
        codebook = fit_codebook(pool, config.n_codewords, seed=config.seed)
    model = SignModel(config, manifest.handshape_dim, codebook, ())
    codes = {h: _codeword_lists(feats, h, model) for h in HANDS}
    n_cw = model.n_codewords

    classes = []
    for a in manifest.classes:
        idx = np.flatnonzero(labels == a.class_id)
        hands = {}
        for h in HANDS:
            if not a.uses(h):
                hands[h] = None
                continue
            hf = [(i, feats[i].hand(h)) for i in idx if feats[i].hand(h).n_present > 0]
            if not hf:
                raise DataValidationError(
                    f"class {a.class_id} uses the {h} hand but it is absent "
                    f"from all of its training samples")
            position = fit_position_model([f.first for _, f in hf], [f.last for _, f in hf],
                                          config.reg_epsilon)
            amount = fit_amount_model([f.amount for _, f in hf], config.sigma_floor)
            dir_counts = np.zeros(config.n_direction_bins, dtype=np.int64)
            cw_counts = np.zeros(n_cw, dtype=np.int64)
            for i, f in hf:
                dir_counts += np.bincount(f.direction_bins, minlength=config.n_direction_bins)
                cw_counts += np.bincount(codes[h][i], minlength=n_cw)
            hands[h] = HandClassModel(
                position, amount,
                TrajectoryClassModel(smoothed_categorical(dir_counts, config.alpha)),
                HandshapeClassModel(smoothed_categorical(cw_counts, config.alpha)),
                compute_movement_gate(amount, config.gate_threshold),
                len(hf))
        classes.append(ClassModel(a.class_id, a.name, a.uses_left, a.uses_right,
                                  hands["left"], hands["right"], len(idx)))
    model.classes = tuple(classes)
    return model


def train(d: Dataset, config: ModelConfig | None = None) -> SignModel:
    """Fit every per-class, per-hand model of a labeled dataset."""
    config = config or ModelConfig()
    feats = [extract_features(s, config) for s in d.samples]
    return fit_from_features(feats, d.labels, d.manifest, config)


# ------------------------------------------------------------ scoring

@dataclass
class _HandStack:
    """Class-stacked parameters of one hand for vectorized scoring."""

    used: np.ndarray
    fp_mean: np.ndarray
    fp_cov: np.ndarray
    lp_mean: np.ndarray
    lp_cov: np.ndarray
    am_mu: np.ndarray
    am_sigma: np.ndarray
    gate: np.ndarray
    log_theta: np.ndarray
    log_phi: np.ndarray

    @classmethod
    def build(cls, model: SignModel, hand: str) -> "_HandStack":
        k = len(model.classes)
        d, c = model.config.n_direction_bins, model.n_codewords
        eye = np.broadcast_to(np.eye(2), (k, 2, 2)).copy()
        s = cls(np.zeros(k, bool), np.zeros((k, 2)), eye.copy(), np.zeros((k, 2)), eye.copy(),
                np.zeros(k), np.ones(k), np.zeros(k, bool), np.zeros((k, d)), np.zeros((k, c)))
        for j, cm in enumerate(model.classes):
            hm = cm.hand(hand)
            if not cm.uses(hand) or hm is None:
                continue
            s.used[j] = True
            s.fp_mean[j], s.fp_cov[j] = hm.position.fp.mean, hm.position.fp.cov
            s.lp_mean[j], s.lp_cov[j] = hm.position.lp.mean, hm.position.lp.cov
            s.am_mu[j], s.am_sigma[j] = hm.amount.mu, hm.amount.sigma
            s.gate[j] = hm.gate.active
            s.log_theta[j] = hm.trajectory.log_theta
            s.log_phi[j] = hm.handshape.log_phi
        for cov in (s.fp_cov, s.lp_cov):
            det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
            if np.any(det[s.used] <= MIN_DET):
                raise NumericalError(f"{hand}: singular position covariance")
        return s


def _log_gauss_stack(p, mean, cov):
    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
    dx = p[0] - mean[:, 0]
    dy = p[1] - mean[:, 1]
    maha = (cov[:, 1, 1] * dx * dx - (cov[:, 0, 1] + cov[:, 1, 0]) * dx * dy
            + cov[:, 0, 0] * dy * dy) / det
    return -LOG_2PI - 0.5 * np.log(det) - 0.5 * maha


def _hand_factor_rows(hf: HandFeatures, codes, st: _HandStack, k: int) -> np.ndarray:
    out = np.zeros((4, k))
    if hf.n_present == 0:
        return out
    out[POS] = (_log_gauss_stack(hf.first, st.fp_mean, st.fp_cov)
                + _log_gauss_stack(hf.last, st.lp_mean, st.lp_cov))
    z = (hf.amount - st.am_mu) / st.am_sigma
    out[AMOUNT] = -HALF_LOG_2PI - np.log(st.am_sigma) - 0.5 * z * z
    nd = len(hf.direction_bins)
    if nd:
        counts = np.bincount(hf.direction_bins, minlength=st.log_theta.shape[1])
        out[TRAJ] = np.where(st.gate, st.log_theta @ counts / nd, 0.0)
    if len(codes):
        counts = np.bincount(codes, minlength=st.log_phi.shape[1])
        out[HS] = st.log_phi @ counts / len(codes)
    out[:, ~st.used] = 0.0
    return out


def factor_tensor(feats: Sequence[SampleFeatures], model: SignModel):
    """Per-sample log-factors and impossibility flags.

    Returns
    -------
    factors : ndarray of shape (n_samples, 2, 4, n_classes)
        Hand x (position, amount, gated trajectory, handshape) log-factors;
        zero for hands a class does not use.
    impossible : ndarray of shape (n_samples, n_classes), bool
    """
    k = len(model.classes)
    stack = model._stack
    frac = model.config.presence_fraction
    codes = {h: _codeword_lists(feats, h, model) for h in HANDS}
    out = np.zeros((len(feats), 2, 4, k))
    impossible = np.zeros((len(feats), k), dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore"):
        for i, f in enumerate(feats):
            for hi, h in enumerate(HANDS):
                hf, st = f.hand(h), stack[h]
                out[i, hi] = _hand_factor_rows(hf, codes[h][i], st, k)
                if not _is_present(hf.n_present, f.n_frames, frac):
                    impossible[i] |= st.used
    return out, impossible


def combine(factors: np.ndarray, impossible: np.ndarray, mask: FeatureMask = ALL) -> np.ndarray:
    """Sum the enabled log-factors over hands; impossible classes get ``-inf``."""
    idx = mask.factors
    total = factors[:, 0, idx, :].sum(axis=1) + factors[:, 1, idx, :].sum(axis=1)
    return np.where(impossible, -np.inf, total)


def rank(scores: np.ndarray, class_ids: np.ndarray) -> np.ndarray:
    """Class order by descending score, ties to the lower class id."""
    return np.lexsort((class_ids, -scores))


def ranked_scores(scores, impossible, class_ids) -> list[ClassScore]:
    order = rank(scores, class_ids)
    return [ClassScore(int(class_ids[j]), float(scores[j]), bool(impossible[j])) for j in order]


def score_samples(samples: Sequence[SignSample], model: SignModel, mask: FeatureMask = ALL):
    """Return ``(scores, impossible)`` arrays of shape (n_samples, n_classes)."""
    feats = [extract_features(s, model.config) for s in samples]
    factors, impossible = factor_tensor(feats, model)
    return combine(factors, impossible, mask), impossible


def classify(s: SignSample, m: SignModel, mask: FeatureMask = ALL) -> list[ClassScore]:
    scores, impossible = score_samples([s], m, mask)
    return ranked_scores(scores[0], impossible[0], m.class_ids)


def predict(s: SignSample, m: SignModel, mask: FeatureMask = ALL) -> int:
    return classify(s, m, mask)[0].class_id


def predict_from_scores(scores: np.ndarray, class_ids: np.ndarray) -> np.ndarray:
    return np.array([class_ids[rank(row, class_ids)[0]] for row in scores])


def hand_log_prob(s: SignSample, hand: str, hcm: HandClassModel, model: SignModel,
                  mask: FeatureMask = ALL) -> float:
    """Log-probability of one hand of ``s`` under one class's hand model.

    Scalar reference route through the per-factor functions; the batch
    scorer is checked against it.
    """
    cfg = model.config
    track = s.hand(hand)
    p = track.positions
    if len(p) == 0 and (mask.use_position or mask.use_movement):
        raise DataValidationError(
            f"sample {s.id}: {hand} hand has no present frames; gate by presence first")
    total = 0.0
    if mask.use_position:
        total += position_log_prob(p[0], p[-1], hcm.position)
    if mask.use_movement:
        dirs = extract_directions(p, cfg.min_displacement)
        total += movement_log_prob(dirs, amount_of_movement(p), hcm.trajectory, hcm.amount, hcm.gate)
    if mask.use_handshape:
        total += handshape_log_prob(track.handshapes, hcm.handshape, model.codebook)
    return total


# ------------------------------------------------------------ estimator

class BagOfWordsSignClassifier(ClassifierMixin, BaseEstimator):
    """Sign classifier that ignores frame order inside each subclassifier.

    Parameters
    ----------
    n_direction_bins : int, default=16
        Angular bins of the distribution of movement directions.
    n_codewords : int, default=32
        Size of the shared handshape codebook (ignored for ``hs_quantizer='argmax'``).
    alpha : float, default=1.0
        Additive smoothing of both categorical models.
    gate_threshold : float, default=5.0
        Mean amount of movement (cm) at or below which a class ignores trajectory.
    presence_fraction : float, default=0.5
        A hand counts as present if detected in strictly more than this fraction of frames.
    reg_epsilon : float, default=1e-4
        Added to the diagonal of every position covariance (cm^2).
    sigma_floor : float, default=0.1
        Lower bound of the amount-of-movement standard deviation (cm).
    min_displacement : float, default=0.2
        Frame-to-frame displacements shorter than this (cm) yield no direction.
    hs_quantizer : {'codebook', 'argmax'}, default='codebook'
    features : str, default='all'
        Feature mask used by ``predict``: all, hs, mov, pos, hs-pos, hs-mov, pos-mov.
    random_state : int, default=0
        Seed of the codebook k-means.
    """

    def __init__(self, n_direction_bins=16, n_codewords=32, alpha=1.0, gate_threshold=5.0,
                 presence_fraction=0.5, reg_epsilon=1e-4, sigma_floor=0.1,
                 min_displacement=0.2, hs_quantizer="codebook", features="all",
                 random_state=0):
        self.n_direction_bins = n_direction_bins
        self.n_codewords = n_codewords
        self.alpha = alpha
        self.gate_threshold = gate_threshold
        self.presence_fraction = presence_fraction
        self.reg_epsilon = reg_epsilon
        self.sigma_floor = sigma_floor
        self.min_displacement = min_displacement
        self.hs_quantizer = hs_quantizer
        self.features = features
        self.random_state = random_state

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            n_direction_bins=self.n_direction_bins, n_codewords=self.n_codewords,
            alpha=self.alpha, gate_threshold=self.gate_threshold,
            presence_fraction=self.presence_fraction, reg_epsilon=self.reg_epsilon,
            sigma_floor=self.sigma_floor, min_displacement=self.min_displacement,
            hs_quantizer=self.hs_quantizer, seed=int(self.random_state or 0))

    def fit(self, X, y=None, annotations=None):
        """Fit from a :class:`Dataset`, or samples plus labels and class annotations."""
        samples, labels, manifest = resolve_training_input(X, y, annotations)
        config = self._model_config()
        feats = [extract_features(s, config) for s in samples]
        self.model_ = fit_from_features(feats, labels, manifest, config)
        self.classes_ = self.model_.class_ids
        return self

    def _factors(self, samples):
        feats = [extract_features(s, self.model_.config) for s in samples]
        return factor_tensor(feats, self.model_)

    def decision_function(self, X, features=None):
        """Log-scores of shape (n_samples, n_classes); ``-inf`` marks impossible classes."""
        check_is_fitted(self, "model_")
        samples = check_samples(X, self.model_.handshape_dim)
        mask = check_feature_mask(self.features if features is None else features)
        factors, impossible = self._factors(samples)
        return combine(factors, impossible, mask)

    def predict(self, X):
        scores = self.decision_function(X)
        return predict_from_scores(scores, self.classes_)

    def predict_log_proba(self, X):
        """Class posteriors under a uniform prior, in log space."""
        scores = self.decision_function(X)
        finite = np.where(np.isfinite(scores), scores, -np.inf)
        top = finite.max(axis=1, keepdims=True)
        top = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(divide="ignore"):
            z = np.log(np.exp(finite - top).sum(axis=1, keepdims=True))
        return finite - top - z

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def classify(self, sample: SignSample, features=None) -> list[ClassScore]:
        check_is_fitted(self, "model_")
        mask = check_feature_mask(self.features if features is None else features)
        return classify(sample, self.model_, mask)

    def score(self, X, y=None, sample_weight=None):
        samples = check_samples(X, None)
        if y is None:
            y = np.array([s.label for s in samples])
        return super().score(samples, y, sample_weight=sample_weight)

    @classmethod
    def from_model(cls, model: SignModel, features="all") -> "BagOfWordsSignClassifier":
        c = model.config
        est = cls(c.n_direction_bins, c.n_codewords, c.alpha, c.gate_threshold,
                  c.presence_fraction, c.reg_epsilon, c.sigma_floor, c.min_displacement,
                  c.hs_quantizer, features, c.seed)
        est.model_ = model
        est.classes_ = model.class_ids
        return est
