"""Synthetic sign datasets with known generative parameters.

A hand track starts at a first position drawn from the class Gaussian and
walks with unit steps drawn from the class direction profile; the walk is
scaled so its amount of movement equals a target drawn from the class
amount Gaussian, and a small end jitter is spread linearly over the frames.
The last position is therefore the walk's endpoint; its mean and spread
are estimated by simulation when the prototype is built. Handshape frames
are noisy one-hot vectors whose argmax is the drawn handshape.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .classifier import (ClassModel, HandClassModel, ModelConfig, SignModel, combine,
                         extract_features, factor_tensor, predict_from_scores)
from .dataset import HANDS, ClassAnnotation, Dataset, HandTrack, Manifest, SignSample
from .handshape import HandshapeClassModel
from .movement import AmountModel, MovementGate, TrajectoryClassModel, amount_of_movement
from .position import Gaussian2D, PositionClassModel

PROFILE_FLOOR = 1e-3
GATE_THRESHOLD = 5.0


@dataclass
class GeneratorConfig:
    num_classes: int = 64
    num_subjects: int = 10
    reps_per_subject: int = 5
    subject_offset_scale: float = 1.0
    seed: int = 0
    n_direction_bins: int = 16
    handshape_dim: int = 16
    fraction_one_handed: float = 42 / 64
    fraction_low_movement: float = 0.2
    pos_noise: float = 1.2
    end_jitter: float = 0.5
    amount_noise_fraction: float = 0.1
    hs_noise: float = 0.3
    frames: tuple[int, int] = (12, 24)
    min_separation: float = 10.0
    direction_concentration: float = 0.1
    handshape_concentration: float = 0.1
    mismatch: bool = False
    curvature: float = 0.25

    def __post_init__(self):
        self.frames = tuple(int(x) for x in self.frames)
        counts = (self.num_classes, self.num_subjects, self.reps_per_subject,
                  self.n_direction_bins, self.handshape_dim)
        if min(counts) < 1:
            raise ValueError("all counts must be >= 1")
        for name in ("fraction_one_handed", "fraction_low_movement"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 1 <= self.frames[0] <= self.frames[1]:
            raise ValueError("frames must be a range (lo, hi) with 1 <= lo <= hi")
        if not 0 <= self.hs_noise < 0.5:
            raise ValueError("hs_noise must be in [0, 0.5) so the argmax survives")
        if min(self.pos_noise, self.subject_offset_scale, self.amount_noise_fraction,
               self.end_jitter) < 0:
            raise ValueError("noise scales must be non-negative")

    def to_dict(self):
        d = asdict(self)
        d["frames"] = list(self.frames)
        return d

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@dataclass(eq=False)
class HandPrototype:
    fp_mean: np.ndarray
    lp_mean: np.ndarray
    pos_noise: float
    direction_profile: np.ndarray
    amount_mean: float
    amount_noise: float
    handshape_profile: np.ndarray
    lp_spread: np.ndarray = None
    closed: bool = False

    def __post_init__(self):
        if self.lp_spread is None:
            self.lp_spread = np.zeros((2, 2))

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, obj):
        arr = {k: np.asarray(obj[k], dtype=float)
               for k in ("fp_mean", "lp_mean", "direction_profile", "handshape_profile",
                         "lp_spread")}
        return cls(pos_noise=float(obj["pos_noise"]), amount_mean=float(obj["amount_mean"]),
                   amount_noise=float(obj["amount_noise"]), closed=bool(obj.get("closed", False)),
                   **arr)


@dataclass(eq=False)
class ClassPrototype:
    class_id: int
    uses_left: bool
    uses_right: bool
    left: HandPrototype | None
    right: HandPrototype | None
    frames: tuple[int, int] = (12, 24)

    def hand(self, h):
        return self.left if h == "left" else self.right

    @property
    def gated(self) -> bool:
        return any(p is not None and p.amount_mean <= GATE_THRESHOLD
                   for p in (self.left, self.right))

    def to_dict(self):
        return {"class_id": self.class_id, "uses_left": self.uses_left,
                "uses_right": self.uses_right, "frames": list(self.frames),
                "left": None if self.left is None else self.left.to_dict(),
                "right": None if self.right is None else self.right.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["class_id"]), bool(obj["uses_left"]), bool(obj["uses_right"]),
                   None if obj["left"] is None else HandPrototype.from_dict(obj["left"]),
                   None if obj["right"] is None else HandPrototype.from_dict(obj["right"]),
                   tuple(obj["frames"]))


class SeparationError(ValueError):
    """Prototype means cannot be spread at the requested minimum separation."""


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _profile(rng, size, concentration):
    p = rng.dirichlet(np.full(size, concentration)) + PROFILE_FLOOR
    return p / p.sum()


# ------------------------------------------------------------ track synthesis

def _walk(rng, profile, n_steps, closed=False):
    """Cumulative unit steps; a closed walk pairs every step with its negation.

    Closing preserves the step distribution only for point-symmetric
    profiles. With an odd step count the spare step has length zero.
    """
    d = len(profile)
    n_draw = n_steps // 2 if closed else n_steps
    bins = rng.choice(d, size=n_draw, p=profile)
    width = 2 * math.pi / d
    angle = bins * width + rng.uniform(-0.3, 0.3, n_draw) * width
    steps = np.column_stack([np.cos(angle), np.sin(angle)])
    if closed:
        steps = np.vstack([steps, -steps, np.zeros((n_steps - 2 * n_draw, 2))])
        steps = steps[rng.permutation(n_steps)]
    return np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])


def _scale_for_amount(base, walk, target, iters=40):
    """Scale s with amount(base + s*walk) == target, by bisection.

    The amount is a maximum of norms of affine functions of s, hence convex;
    with amount(base) < target the sublevel set below target is an interval
    starting at 0, so bisection finds its right end.
    """
    if target <= amount_of_movement(base):
        return 0.0
    hi = 1.0
    while amount_of_movement(base + hi * walk) < target:
        hi *= 2
        if hi > 1e6:
            return hi
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if amount_of_movement(base + mid * walk) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _hand_track(p: HandPrototype, offset, n_frames, cfg: GeneratorConfig, rng):
    fp = p.fp_mean + offset + rng.normal(0, p.pos_noise, 2)
    target = max(rng.normal(p.amount_mean, p.amount_noise), 0.0)
    if n_frames == 1:
        pos = fp[None]
    else:
        s = np.linspace(0.0, 1.0, n_frames)[:, None]
        walk = _walk(rng, p.direction_profile, n_frames - 1, p.closed)
        base = fp + s * rng.normal(0, cfg.end_jitter, 2)
        if cfg.mismatch:
            end = walk[-1]
            normal = np.array([-end[1], end[0]]) / (np.hypot(*end) or 1.0)
            if not np.any(end):
                normal = np.array([0.0, 1.0])
            base = base + cfg.curvature * p.amount_mean * np.sin(np.pi * s) * normal
        pos = base + _scale_for_amount(base, walk, target) * walk
    shapes = rng.choice(len(p.handshape_profile), size=n_frames, p=p.handshape_profile)
    hs = _noisy_onehot(shapes, len(p.handshape_profile), cfg.hs_noise, rng)
    return HandTrack(np.ones(n_frames, dtype=bool), pos, hs)


def _noisy_onehot(shapes, k, noise, rng):
    eps = rng.uniform(0, noise, len(shapes))[:, None]
    hs = (1 - eps) * np.eye(k)[shapes] + eps * rng.dirichlet(np.ones(k), len(shapes))
    return hs / hs.sum(axis=1, keepdims=True)


def _clutter_track(hand, n_frames, cfg, rng):
    side = 1.0 if hand == "left" else -1.0
    start = np.array([20.0 * side, -55.0]) + rng.normal(0, 5.0, 2)
    pos = start + np.cumsum(rng.normal(0, 1.0, (n_frames, 2)), axis=0)
    shapes = rng.integers(cfg.handshape_dim, size=n_frames)
    return HandTrack(np.ones(n_frames, dtype=bool), pos,
                     _noisy_onehot(shapes, cfg.handshape_dim, cfg.hs_noise, rng))


# ------------------------------------------------------------ prototypes

def _displacement_moments(rng, profile, amount_mean, amount_noise, cfg, n_sims=400):
    """Mean and covariance of (last - first) position, by simulation."""
    disp = np.zeros((n_sims, 2))
    for i in range(n_sims):
        t = int(rng.integers(cfg.frames[0], cfg.frames[1] + 1))
        jitter = rng.normal(0, cfg.end_jitter, 2)
        if t < 2:
            continue
        w = _walk(rng, profile, t - 1)
        target = max(rng.normal(amount_mean, amount_noise), 0.0)
        disp[i] = target / amount_of_movement(w) * w[-1] + jitter
    return disp.mean(axis=0), np.cov(disp.T, bias=True)


def _hand_prototype(rng, cfg, profile, amount, fp_mean, hs_profile):
    noise = float(cfg.amount_noise_fraction * amount + 0.2)
    mean, spread = _displacement_moments(rng, profile, amount, noise, cfg)
    return HandPrototype(np.asarray(fp_mean, dtype=float), fp_mean + mean, cfg.pos_noise,
                         profile, float(amount), noise, hs_profile, spread)


def sample_prototypes(cfg: GeneratorConfig, max_tries: int = 2000) -> list[ClassPrototype]:
    """Draw class prototypes with separated (first, last) position means.

    Raises
    ------
    SeparationError
        When some class cannot be placed at ``cfg.min_separation`` from all
        previous ones; the message reports the separation achieved.
    """
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    k = cfg.num_classes
    one_handed = np.zeros(k, bool)
    one_handed[rng.permutation(k)[:_round_half_up(cfg.fraction_one_handed * k)]] = True
    low = np.zeros(k, bool)
    low[rng.permutation(k)[:_round_half_up(cfg.fraction_low_movement * k)]] = True

    centers = {"right": np.array([-10.0, -35.0]), "left": np.array([10.0, -35.0])}
    placed = []
    protos = []
    for c in range(k):
        uses = {"right": True, "left": not one_handed[c]}
        hands = {}
        for h in HANDS:
            if not uses[h]:
                hands[h] = None
                continue
            profile = _profile(rng, cfg.n_direction_bins, cfg.direction_concentration)
            amount = rng.uniform(1.0, 3.5) if low[c] else rng.uniform(10.0, 30.0)
            hp = _hand_prototype(rng, cfg, profile, amount,
                                 centers[h] + rng.uniform([-30, -30], [30, 30]),
                                 _profile(rng, cfg.handshape_dim, cfg.handshape_concentration))
            if h == "right":
                disp = hp.lp_mean - hp.fp_mean
                best = -np.inf
                for _ in range(max_tries):
                    key = np.concatenate([hp.fp_mean, hp.lp_mean])
                    sep = min((np.linalg.norm(key - q) for q in placed), default=np.inf)
                    best = max(best, sep)
                    if sep >= cfg.min_separation:
                        break
                    hp.fp_mean = centers[h] + rng.uniform([-30, -30], [30, 30])
                    hp.lp_mean = hp.fp_mean + disp
                else:
                    raise SeparationError(
                        f"class {c}: best separation {best:.3f} cm < requested "
                        f"{cfg.min_separation} cm after {max_tries} draws")
                placed.append(np.concatenate([hp.fp_mean, hp.lp_mean]))
            hands[h] = hp
        protos.append(ClassPrototype(c, uses["left"], uses["right"], hands["left"],
                                     hands["right"], cfg.frames))
    return protos


def factorial_prototypes(cfg: GeneratorConfig, levels: int = 3) -> list[ClassPrototype]:
    """Right-handed classes on a position x movement x handshape grid.

    Each feature takes ``levels`` values and every combination is one class,
    so any single feature (or pair) leaves several classes indistinguishable.
    Direction profiles are point-symmetric and walks are closed, so the last
    position differs from the first by the end jitter only and positions
    carry no movement information.
    """
    d, kh = cfg.n_direction_bins, cfg.handshape_dim
    positions = [np.array([-25.0 + 25.0 * i, -30.0 + 5.0 * (i % 2)]) for i in range(levels)]
    movements = []
    for i in range(levels):
        profile = np.full(d, PROFILE_FLOOR)
        for b in (i * d // (2 * levels), i * d // (2 * levels) + d // 2):
            profile[b] += 1.0
        movements.append((profile / profile.sum(), 8.0 + 8.0 * i))
    shapes = []
    for i in range(levels):
        profile = np.full(kh, PROFILE_FLOOR)
        profile[(2 * i) % kh] += 0.7
        profile[(2 * i + 1) % kh] += 0.3
        shapes.append(profile / profile.sum())
    protos = []
    c = 0
    for pi in range(levels):
        for mi in range(levels):
            for si in range(levels):
                profile, amount = movements[mi]
                hp = HandPrototype(positions[pi].copy(), positions[pi].copy(), cfg.pos_noise,
                                   profile, amount, cfg.amount_noise_fraction * amount + 0.2,
                                   shapes[si], cfg.end_jitter ** 2 * np.eye(2), closed=True)
                protos.append(ClassPrototype(c, False, True, None, hp, cfg.frames))
                c += 1
    return protos


def make_twin(prototypes, source: int, target: int) -> list[ClassPrototype]:
    """Copy class ``source`` onto ``target`` with its handshape profile rotated by K/2."""
    out = list(prototypes)
    src = prototypes[source]
    hands = {}
    for h in HANDS:
        hp = src.hand(h)
        if hp is not None:
            k = len(hp.handshape_profile)
            profile = np.roll(hp.handshape_profile, k // 2)
            hp = replace(hp, fp_mean=hp.fp_mean.copy(), lp_mean=hp.lp_mean.copy(),
                         handshape_profile=profile)
        hands[h] = hp
    out[target] = ClassPrototype(prototypes[target].class_id, src.uses_left, src.uses_right,
                                 hands["left"], hands["right"], src.frames)
    return out


# ------------------------------------------------------------ datasets

def generate_dataset(prototypes, cfg: GeneratorConfig) -> Dataset:
    rng = np.random.default_rng([cfg.seed, 0xDA7A])
    offsets = rng.normal(0, cfg.subject_offset_scale, (cfg.num_subjects, 2))
    samples = []
    for subj in range(cfg.num_subjects):
        for p in prototypes:
            for rep in range(cfg.reps_per_subject):
                srng = np.random.default_rng([cfg.seed, subj, p.class_id, rep])
                t = int(srng.integers(p.frames[0], p.frames[1] + 1))
                tracks = {}
                for h in HANDS:
                    hp = p.hand(h)
                    if hp is not None:
                        tracks[h] = _hand_track(hp, offsets[subj], t, cfg, srng)
                    elif srng.random() < 0.5:
                        tracks[h] = HandTrack.absent(t, cfg.handshape_dim)
                    else:
                        tracks[h] = _clutter_track(h, t, cfg, srng)
                samples.append(SignSample(f"c{p.class_id:03d}_s{subj + 1:02d}_r{rep}", subj + 1,
                                          p.class_id, np.arange(t), tracks["left"],
                                          tracks["right"]))
    manifest = Manifest(len(prototypes), cfg.handshape_dim, tuple(
        ClassAnnotation(p.class_id, f"sign{p.class_id:03d}", p.uses_left, p.uses_right)
        for p in prototypes))
    return Dataset(manifest, tuple(samples))


def oracle_model(prototypes, subject_offset_scale: float = 0.0,
                 presence_fraction: float = 0.5) -> SignModel:
    """The classifier's factor model with the true generative parameters plugged in.

    Subject offsets are integrated out, so the first-position variance is
    ``pos_noise**2 + subject_offset_scale**2``; the last position adds the
    simulated spread of the walk displacement.
    """
    dims = {len(p.hand(h).handshape_profile) for p in prototypes for h in HANDS
            if p.hand(h) is not None}
    bins = {len(p.hand(h).direction_profile) for p in prototypes for h in HANDS
            if p.hand(h) is not None}
    if len(dims) != 1 or len(bins) != 1:
        raise ValueError("prototypes disagree on handshape or direction dimensions")
    config = ModelConfig(n_direction_bins=bins.pop(), hs_quantizer="argmax",
                         presence_fraction=presence_fraction)
    classes = []
    for p in prototypes:
        hands = {}
        for h in HANDS:
            hp = p.hand(h)
            if hp is None:
                hands[h] = None
                continue
            var = max(hp.pos_noise ** 2 + subject_offset_scale ** 2, config.reg_epsilon)
            cov = var * np.eye(2)
            hands[h] = HandClassModel(
                PositionClassModel(Gaussian2D(hp.fp_mean, cov),
                                   Gaussian2D(hp.lp_mean, cov + hp.lp_spread)),
                AmountModel(hp.amount_mean, max(hp.amount_noise, config.sigma_floor)),
                TrajectoryClassModel(np.asarray(hp.direction_profile, dtype=float)),
                HandshapeClassModel(np.asarray(hp.handshape_profile, dtype=float)),
                MovementGate(hp.amount_mean > GATE_THRESHOLD))
        classes.append(ClassModel(p.class_id, f"sign{p.class_id:03d}", p.uses_left,
                                  p.uses_right, hands["left"], hands["right"]))
    return SignModel(config, dims.pop(), None, tuple(classes))


def oracle_predictions(prototypes, d: Dataset, subject_offset_scale: float = 0.0) -> np.ndarray:
    model = oracle_model(prototypes, subject_offset_scale)
    if set(model.class_ids.tolist()) != set(d.manifest.class_ids):
        raise ValueError("prototype classes do not match the dataset's classes")
    if model.handshape_dim != d.manifest.handshape_dim:
        raise ValueError("prototype handshape dim does not match the dataset")
    feats = [extract_features(s, model.config) for s in d.samples]
    factors, impossible = factor_tensor(feats, model)
    return predict_from_scores(combine(factors, impossible), model.class_ids)


def oracle_accuracy(prototypes, d: Dataset, subject_offset_scale: float = 0.0) -> float:
    pred = oracle_predictions(prototypes, d, subject_offset_scale)
    return float(np.mean(pred == d.labels))


# ------------------------------------------------------------ files

def save_prototypes(prototypes, cfg: GeneratorConfig, path) -> None:
    doc = {"generator": cfg.to_dict(), "prototypes": [p.to_dict() for p in prototypes]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_prototypes(path) -> tuple[list[ClassPrototype], GeneratorConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ([ClassPrototype.from_dict(p) for p in doc["prototypes"]],
            GeneratorConfig.from_dict(doc["generator"]))
