"""Per-class 2D Gaussian models of the first and last hand positions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NumericalError

LOG_2PI = math.log(2 * math.pi)
MIN_DET = 1e-12


@dataclass(frozen=True, eq=False)
class Gaussian2D:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(2))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float).reshape(2, 2))

    @property
    def det(self) -> float:
        c = self.cov
        return float(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0])

    def to_dict(self):
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["mean"], obj["cov"])


@dataclass(frozen=True)
class PositionClassModel:
    fp: Gaussian2D
    lp: Gaussian2D

    def to_dict(self):
        return {"fp": self.fp.to_dict(), "lp": self.lp.to_dict()}

    @classmethod
    def from_dict(cls, obj):
        return cls(Gaussian2D.from_dict(obj["fp"]), Gaussian2D.from_dict(obj["lp"]))


def fit_gaussian(points, reg_epsilon: float = 1e-4) -> Gaussian2D:
    """ML mean and covariance (denominator n) plus ``reg_epsilon`` on the diagonal."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(p) == 0:
        raise ValueError("cannot fit a Gaussian to zero points")
    mean = p.mean(axis=0)
    d = p - mean
    cov = d.T @ d / len(p)
    cov = 0.5 * (cov + cov.T) + reg_epsilon * np.eye(2)
    return Gaussian2D(mean, cov)


def fit_position_model(first_positions, last_positions, reg_epsilon: float = 1e-4) -> PositionClassModel:
    first = np.asarray(first_positions, dtype=float).reshape(-1, 2)
    last = np.asarray(last_positions, dtype=float).reshape(-1, 2)
    if len(first) == 0 or len(last) == 0:
        raise ValueError("position lists must be non-empty")
    if len(first) != len(last):
        raise ValueError("first and last position lists differ in length")
    return PositionClassModel(fit_gaussian(first, reg_epsilon), fit_gaussian(last, reg_epsilon))


def log_gaussian_pdf(p, g: Gaussian2D) -> float:
    """Log density of a 2D normal, closed form for the 2x2 case."""
    c = g.cov
    det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
    if not det > MIN_DET:
        raise NumericalError(f"covariance determinant {det:.3g} below {MIN_DET}")
    dx = float(p[0]) - g.mean[0]
    dy = float(p[1]) - g.mean[1]
    maha = (c[1, 1] * dx * dx - (c[0, 1] + c[1, 0]) * dx * dy + c[0, 0] * dy * dy) / det
    return -LOG_2PI - 0.5 * math.log(det) - 0.5 * maha


def position_log_prob(track_first, track_last, m: PositionClassModel) -> float:
    return log_gaussian_pdf(track_first, m.fp) + log_gaussian_pdf(track_last, m.lp)


# ------------------------------------------------------ modality analysis

class ModalityScore(NamedTuple):
    components: int
    bic: float
    best: bool


def _gmm_log_resp(x, weights, means, covs):
    """Per-point, per-component ``log w_k + log N(x; mu_k, S_k)``."""
    n, k = len(x), len(weights)
    out = np.empty((n, k))
    for j in range(k):
        c = covs[j]
        det = c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]
        d = x - means[j]
        maha = (c[1, 1] * d[:, 0] ** 2 - 2 * c[0, 1] * d[:, 0] * d[:, 1]
                + c[0, 0] * d[:, 1] ** 2) / det
        with np.errstate(divide="ignore"):
            out[:, j] = np.log(weights[j]) - LOG_2PI - 0.5 * np.log(det) - 0.5 * maha
    return out


def _logsumexp_rows(a):
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def fit_gmm_2d(points, n_components: int, rng, max_iter: int = 200, tol: float = 1e-6,
               cov_floor: float = 1e-6):
    """Full-covariance 2D mixture by EM.

    Returns ``(weights, means, covs, trace)``; ``trace`` is the data
    log-likelihood before every M-step plus the final value.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(x)
    # k-means++ style seeding of the means
    means = [x[rng.integers(n)]]
    for _ in range(1, n_components):
        d2 = np.min([((x - m) ** 2).sum(1) for m in means], axis=0)
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        means.append(x[idx])
    means = np.array(means)
    base = np.cov(x.T, bias=True) + cov_floor * np.eye(2)
    covs = np.repeat(base[None], n_components, axis=0)
    weights = np.full(n_components, 1.0 / n_components)

    trace = []
    for _ in range(max_iter):
        lr = _gmm_log_resp(x, weights, means, covs)
        ll_i = _logsumexp_rows(lr)
        ll = float(ll_i.sum())
        if trace and ll < trace[-1] - 1e-8 * max(1.0, abs(trace[-1])):
            raise NumericalError(f"GMM EM log-likelihood decreased: {trace[-1]} -> {ll}")
        converged = bool(trace) and abs(ll - trace[-1]) <= tol * abs(trace[-1])
        trace.append(ll)
        if converged:
            break
        resp = np.exp(lr - ll_i[:, None])
        nk = resp.sum(axis=0)
        for j in range(n_components):
            if nk[j] <= 1e-10:
                continue
            means[j] = resp[:, j] @ x / nk[j]
            d = x - means[j]
            c = (resp[:, j, None] * d).T @ d / nk[j]
            c = 0.5 * (c + c.T)
            # clipping eigenvalues at the floor is the exact M-step under
            # the constraint lambda_min >= cov_floor, so EM stays monotone
            lam, u = np.linalg.eigh(c)
            if lam[0] < cov_floor:
                c = (u * np.maximum(lam, cov_floor)) @ u.T
            covs[j] = c
        weights = nk / n
    return weights, means, covs, trace


def gmm_bic(log_likelihood: float, n_components: int, n_points: int) -> float:
    n_params = 6 * n_components - 1
    return -2.0 * log_likelihood + n_params * math.log(n_points)


def analyze_position_modality(points, max_components: int = 3, seed: int = 0,
                              restarts: int = 5) -> list[ModalityScore]:
    """BIC of 1..max_components Gaussian mixtures fitted to 2D positions.

    The entry with the lowest BIC has ``best=True``.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(x) <= 3 * max_components:
        raise ValueError(
            f"need more than {3 * max_components} points for {max_components} components")
    rng = np.random.default_rng(seed)
    scores = []
    for k in range(1, max_components + 1):
        best_ll = -np.inf
        for _ in range(restarts):
            *_, trace = fit_gmm_2d(x, k, rng)
            best_ll = max(best_ll, trace[-1])
        scores.append((k, gmm_bic(best_ll, k, len(x))))
    best_k = min(scores, key=lambda s: s[1])[0]
    return [ModalityScore(k, bic, k == best_k) for k, bic in scores]
