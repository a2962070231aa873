"""Fixed-length bag-of-words feature vectors for use with generic estimators."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .classifier import ModelConfig, extract_features
from .dataset import HANDS
from .handshape import fit_codebook, quantize_argmax, quantize_handshapes
from .validation import check_samples


class BagOfWordsFeatures(TransformerMixin, BaseEstimator):
    """Per-hand order-free descriptors stacked into one vector.

    For each hand: presence fraction, first and last position, amount of
    movement, normalized direction histogram and normalized codeword
    histogram. Absent hands contribute zeros.

    Parameters
    ----------
    n_direction_bins : int, default=16
    n_codewords : int, default=32
    hs_quantizer : {'codebook', 'argmax'}, default='codebook'
    min_displacement : float, default=0.2
    random_state : int, default=0
    """

    def __init__(self, n_direction_bins=16, n_codewords=32, hs_quantizer="codebook",
                 min_displacement=0.2, random_state=0):
        self.n_direction_bins = n_direction_bins
        self.n_codewords = n_codewords
        self.hs_quantizer = hs_quantizer
        self.min_displacement = min_displacement
        self.random_state = random_state

    def _config(self):
        return ModelConfig(n_direction_bins=self.n_direction_bins, n_codewords=self.n_codewords,
                           hs_quantizer=self.hs_quantizer, min_displacement=self.min_displacement,
                           seed=self.random_state)

    def fit(self, X, y=None):
        samples = check_samples(X, None)
        if not samples:
            raise ValueError("no samples to fit")
        self.n_handshapes_ = samples[0].n_handshapes
        check_samples(samples, self.n_handshapes_)
        self.codebook_ = None
        if self._config().hs_quantizer == "codebook":
            pool = np.concatenate([s.hand(h).handshapes for s in samples for h in HANDS])
            self.codebook_ = fit_codebook(pool, self.n_codewords, seed=self.random_state)
        return self

    @property
    def n_words_(self) -> int:
        return self.n_handshapes_ if self.codebook_ is None else self.codebook_.size

    def transform(self, X):
        check_is_fitted(self, "n_handshapes_")
        samples = check_samples(X, self.n_handshapes_)
        cfg = self._config()
        d, c = self.n_direction_bins, self.n_words_
        width = 6 + d + c
        out = np.zeros((len(samples), 2 * width))
        for i, s in enumerate(samples):
            f = extract_features(s, cfg)
            for hi, h in enumerate(HANDS):
                hf = f.hand(h)
                if hf.n_present == 0:
                    continue
                row = out[i, hi * width:(hi + 1) * width]
                row[0] = hf.n_present / f.n_frames
                row[1:3], row[3:5], row[5] = hf.first, hf.last, hf.amount
                if len(hf.direction_bins):
                    row[6:6 + d] = np.bincount(hf.direction_bins, minlength=d) / len(hf.direction_bins)
                codes = (quantize_argmax(hf.handshapes) if self.codebook_ is None
                         else quantize_handshapes(hf.handshapes, self.codebook_))
                row[6 + d:] = np.bincount(codes, minlength=c) / len(codes)
        return out
