"""Input validation helpers for the estimator front-ends."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .dataset import ClassAnnotation, Dataset, Manifest, SignSample
from .exceptions import DataValidationError


def check_samples(X, n_handshapes: int | None) -> list[SignSample]:
    """Coerce ``X`` (Dataset, sample, or iterable of samples) to a list of samples.

    Raises :class:`DataValidationError` on foreign objects or a handshape
    dimension that differs from ``n_handshapes``.
    """
    if isinstance(X, Dataset):
        samples = list(X.samples)
    elif isinstance(X, SignSample):
        samples = [X]
    else:
        samples = list(X)
    for s in samples:
        if not isinstance(s, SignSample):
            raise DataValidationError(f"expected SignSample, got {type(s).__name__}")
        if n_handshapes is not None and s.n_handshapes != n_handshapes:
            raise DataValidationError(
                f"sample {s.id}: handshape dim {s.n_handshapes} != model dim {n_handshapes}")
    return samples


def check_feature_mask(mask):
    from .classifier import FeatureMask

    if isinstance(mask, FeatureMask):
        return mask
    return FeatureMask.parse(str(mask))


def _as_annotations(annotations) -> tuple[ClassAnnotation, ...]:
    if isinstance(annotations, Manifest):
        return annotations.classes
    if isinstance(annotations, dict):
        annotations = annotations.values()
    out = tuple(annotations)
    for a in out:
        if not isinstance(a, ClassAnnotation):
            raise DataValidationError(f"expected ClassAnnotation, got {type(a).__name__}")
    return out


def resolve_training_input(X, y=None, annotations: Iterable | Manifest | None = None):
    """Return ``(samples, labels, manifest)`` for a fit call.

    A :class:`Dataset` carries its own labels and manifest; otherwise
    ``annotations`` is required and ``y`` defaults to the sample labels.
    """
    if isinstance(X, Dataset):
        samples = list(X.samples)
        manifest = X.manifest if annotations is None else None
        k = X.manifest.handshape_dim
    else:
        samples = check_samples(X, None)
        if not samples:
            raise DataValidationError("no training samples")
        manifest = None
        k = samples[0].n_handshapes
    check_samples(samples, k)
    if manifest is None:
        if annotations is None:
            raise DataValidationError("class annotations are required to fit from raw samples")
        classes = _as_annotations(annotations)
        manifest = Manifest(len(classes), k, classes)
    if y is None:
        y = [s.label for s in samples]
    labels = np.asarray(y)
    if len(labels) != len(samples):
        raise DataValidationError(f"{len(labels)} labels for {len(samples)} samples")
    if any(v is None for v in labels.tolist()):
        raise DataValidationError("training samples must be labeled")
    return samples, labels.astype(np.int64), manifest
