"""Handshape bag-of-words: codebook quantization of per-frame probability vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .movement import categorical_log_prob, smoothed_categorical

_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class HandshapeCodebook:
    centroids: np.ndarray

    @property
    def size(self) -> int:
        return len(self.centroids)

    def to_dict(self):
        return {"centroids": self.centroids.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["centroids"], dtype=float))


@dataclass(frozen=True, eq=False)
class HandshapeClassModel:
    phi: np.ndarray

    @property
    def log_phi(self) -> np.ndarray:
        return np.log(self.phi)

    def to_dict(self):
        return {"phi": self.phi.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["phi"], dtype=float))


def _sq_dists(x, c):
    xx = (x ** 2).sum(1)[:, None]
    cc = (c ** 2).sum(1)[None, :]
    return np.maximum(xx - 2 * x @ c.T + cc, 0.0)


def _kmeans_pp(x, k, rng):
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(1)
    for i in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(1))
    return centers


def kmeans(x, k: int, seed=0, max_iter: int = 100, tol: float = 1e-6):
    """Lloyd's k-means with k-means++ seeding.

    Empty clusters are reseeded with the point farthest from its centroid.

    Returns
    -------
    centers : ndarray of shape (k, n_features)
    labels : ndarray of shape (n_samples,)
    trace : list of float
        Inertia after every iteration; non-increasing.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2D array of vectors")
    if len(x) < k:
        raise ValueError(f"need at least {k} vectors for {k} codewords, got {len(x)}")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(x, k, rng)
    labels = _sq_dists(x, centers).argmin(1)
    trace = []
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts):
            centers[j] = x[labels == j].mean(axis=0)
        resid = ((x - centers[labels]) ** 2).sum(1)
        for j in np.flatnonzero(counts == 0):
            far = int(resid.argmax())
            centers[j] = x[far]
            labels[far] = j
            resid[far] = 0.0
        inertia = float(resid.sum())
        if trace and inertia > trace[-1] * (1 + 1e-9) + 1e-12:
            raise NumericalError(f"k-means inertia increased: {trace[-1]} -> {inertia}")
        trace.append(inertia)
        new_labels = _sq_dists(x, centers).argmin(1)
        # keep the old label where the distance is tied, so the step never worsens
        d_new = ((x - centers[new_labels]) ** 2).sum(1)
        d_old = ((x - centers[labels]) ** 2).sum(1)
        labels = np.where(d_new < d_old, new_labels, labels)
        if len(trace) > 1 and trace[-2] - inertia <= tol * trace[-2]:
            break
    return centers, labels, trace


def fit_codebook(frames, n_codewords: int = 32, seed=0) -> HandshapeCodebook:
    centers, _, _ = kmeans(frames, n_codewords, seed=seed)
    return HandshapeCodebook(centers)


def quantize_handshapes(v, cb: HandshapeCodebook) -> np.ndarray:
    """Nearest-centroid index of every row of ``v``; ties go to the lowest index."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[None]
    if v.shape[1] != cb.centroids.shape[1]:
        raise ValueError(
            f"handshape dim {v.shape[1]} does not match codebook dim {cb.centroids.shape[1]}")
    out = np.empty(len(v), dtype=np.int64)
    for start in range(0, len(v), _CHUNK):
        block = v[start:start + _CHUNK]
        d = ((block[:, None, :] - cb.centroids[None]) ** 2).sum(-1)
        out[start:start + _CHUNK] = d.argmin(1)
    return out


def quantize_handshape(v, cb: HandshapeCodebook) -> int:
    return int(quantize_handshapes(np.asarray(v, dtype=float).reshape(1, -1), cb)[0])


def quantize_argmax(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(len(v), -1).argmax(1)


def fit_handshape_model(samples, n_codewords: int, alpha: float = 1.0) -> HandshapeClassModel:
    """``samples`` is a list of codeword-index sequences, one per training sample."""
    counts = np.zeros(n_codewords, dtype=np.int64)
    for codes in samples:
        if len(codes):
            counts += np.bincount(np.asarray(codes, dtype=np.int64), minlength=n_codewords)
    return HandshapeClassModel(smoothed_categorical(counts, alpha))


def handshape_log_prob(frame_vectors, m: HandshapeClassModel, cb: HandshapeCodebook | None) -> float:
    """Mean codeword log-probability over frames; ``cb=None`` quantizes by argmax."""
    if len(frame_vectors) == 0:
        return 0.0
    codes = quantize_argmax(frame_vectors) if cb is None else quantize_handshapes(frame_vectors, cb)
    counts = np.bincount(codes, minlength=len(m.phi))
    return categorical_log_prob(counts, m.log_phi)
