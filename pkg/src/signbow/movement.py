"""Amount of movement, distribution of directions, and the little-movement gate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataValidationError

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class AmountModel:
    mu: float
    sigma: float

    def to_dict(self):
        return {"mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, obj):
        return cls(float(obj["mu"]), float(obj["sigma"]))


@dataclass(frozen=True, eq=False)
class TrajectoryClassModel:
    theta: np.ndarray

    @property
    def log_theta(self) -> np.ndarray:
        return np.log(self.theta)

    def to_dict(self):
        return {"theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["theta"], dtype=float))


@dataclass(frozen=True)
class MovementGate:
    active: bool


def amount_of_movement(track) -> float:
    """Largest Euclidean distance between any two positions of the track."""
    p = np.asarray(track, dtype=float).reshape(-1, 2)
    if len(p) == 0:
        raise ValueError("amount of movement of an empty track")
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1).max()))


def fit_amount_model(amounts, sigma_floor: float = 0.1) -> AmountModel:
    a = np.asarray(amounts, dtype=float).ravel()
    if len(a) == 0:
        raise ValueError("cannot fit an amount model to zero samples")
    return AmountModel(float(a.mean()), max(float(a.std()), sigma_floor))


def amount_log_prob(x_am: float, m: AmountModel) -> float:
    z = (x_am - m.mu) / m.sigma
    return -HALF_LOG_2PI - math.log(m.sigma) - 0.5 * z * z


def extract_directions(track, min_displacement: float = 0.2) -> np.ndarray:
    """Unit vectors of successive displacements with norm >= ``min_displacement``."""
    p = np.asarray(track, dtype=float).reshape(-1, 2)
    if len(p) < 2:
        return np.empty((0, 2))
    d = np.diff(p, axis=0)
    norm = np.hypot(d[:, 0], d[:, 1])
    keep = (norm >= min_displacement) & (norm > 0)
    return d[keep] / norm[keep, None]


def quantize_directions(v, n_bins: int) -> np.ndarray:
    """Vectorized :func:`quantize_direction`; ``v`` has shape (n, 2)."""
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    norm = np.hypot(v[:, 0], v[:, 1])
    if np.any(np.abs(norm - 1.0) > UNIT_TOL):
        raise DataValidationError("direction vectors must have unit norm")
    width = 2 * math.pi / n_bins
    angle = np.arctan2(v[:, 1], v[:, 0])
    return np.floor((angle + width / 2) / width).astype(np.int64) % n_bins


def quantize_direction(v, n_bins: int) -> int:
    """Index of the bin whose center angle ``2*pi*i/n_bins`` is nearest to ``v``."""
    return int(quantize_directions(v, n_bins)[0])


def direction_counts(directions, n_bins: int) -> np.ndarray:
    return np.bincount(quantize_directions(directions, n_bins), minlength=n_bins)


def smoothed_categorical(counts, alpha: float) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return (counts + alpha) / (counts.sum() + alpha * len(counts))


def fit_trajectory_model(direction_lists, n_bins: int = 16, alpha: float = 1.0) -> TrajectoryClassModel:
    if n_bins < 2:
        raise ValueError("need at least 2 direction bins")
    counts = np.zeros(n_bins, dtype=np.int64)
    for dirs in direction_lists:
        if len(dirs):
            counts += direction_counts(dirs, n_bins)
    return TrajectoryClassModel(smoothed_categorical(counts, alpha))


def categorical_log_prob(counts, log_p) -> float:
    """Mean log-probability of a bag given its histogram; 0 for an empty bag."""
    n = counts.sum()
    if n == 0:
        return 0.0
    return float(counts @ log_p / n)


def trajectory_log_prob(sample_directions, m: TrajectoryClassModel, n_bins: int | None = None) -> float:
    n_bins = len(m.theta) if n_bins is None else n_bins
    if len(sample_directions) == 0:
        return 0.0
    return categorical_log_prob(direction_counts(sample_directions, n_bins), m.log_theta)


def compute_movement_gate(m: AmountModel, threshold: float = 5.0) -> MovementGate:
    return MovementGate(m.mu > threshold)


def movement_log_prob(sample_directions, x_am: float, trajectory_model: TrajectoryClassModel,
                      amount_model: AmountModel, gate: MovementGate) -> float:
    score = amount_log_prob(x_am, amount_model)
    if gate.active:
        score += trajectory_log_prob(sample_directions, trajectory_model)
    return score
