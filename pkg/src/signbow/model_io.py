"""JSON model files for both backends.

Floats are written with ``repr`` precision, so every parameter round-trips
exactly. Zero-probability HMM transitions are stored as ``null``.
"""
from __future__ import annotations

import json
from pathlib import Path

from .classifier import ClassModel, HandClassModel, ModelConfig, SignModel
from .dataset import HANDS
from .exceptions import ModelFormatError
from .handshape import HandshapeCodebook
from .hmm import HMMClassModel, HMMConfig, HMMSignModel

FORMAT_VERSION = 1


def model_to_dict(model: SignModel | HMMSignModel) -> dict:
    hmm = isinstance(model, HMMSignModel)
    base = model.base if hmm else model
    classes = []
    for c in base.classes:
        entry = {"id": c.class_id, "name": c.name, "uses_left": c.uses_left,
                 "uses_right": c.uses_right, "n_samples": c.n_samples}
        for h in HANDS:
            hm = c.hand(h)
            if hm is not None:
                entry[h] = hm.to_dict()
                if hmm:
                    entry[h]["hmm"] = model.hmms[c.class_id, h].to_dict()
        classes.append(entry)
    out = {"format_version": FORMAT_VERSION, "backend": "hmm" if hmm else "bow",
           "config": base.config.to_dict(), "handshape_dim": base.handshape_dim,
           "codebook": None if base.codebook is None else base.codebook.to_dict(),
           "classes": classes}
    if hmm:
        out["hmm_config"] = model.hmm_config.to_dict()
    return out


def model_from_dict(obj: dict) -> SignModel | HMMSignModel:
    if not isinstance(obj, dict):
        raise ModelFormatError("model file must hold a JSON object")
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r}; expected {FORMAT_VERSION}")
    backend = obj.get("backend", "bow")
    if backend not in ("bow", "hmm"):
        raise ModelFormatError(f"unknown backend {backend!r}")
    try:
        config = ModelConfig.from_dict(obj["config"])
        cb = obj["codebook"]
        classes, hmms = [], {}
        for e in obj["classes"]:
            hands = {}
            for h in HANDS:
                hd = e.get(h)
                hands[h] = None if hd is None else HandClassModel.from_dict(hd)
                if hd is not None and backend == "hmm":
                    hmms[int(e["id"]), h] = HMMClassModel.from_dict(hd["hmm"])
            classes.append(ClassModel(int(e["id"]), str(e["name"]), bool(e["uses_left"]),
                                      bool(e["uses_right"]), hands["left"], hands["right"],
                                      int(e.get("n_samples", 0))))
        base = SignModel(config, int(obj["handshape_dim"]),
                         None if cb is None else HandshapeCodebook.from_dict(cb), tuple(classes))
        if backend == "hmm":
            return HMMSignModel(base, HMMConfig.from_dict(obj["hmm_config"]), hmms)
        return base
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"malformed model: {e!r}") from e


def save_model(model: SignModel | HMMSignModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1, allow_nan=False) + "\n",
                          encoding="utf-8")


def load_model(path) -> SignModel | HMMSignModel:
    """Read a model file.

    Raises
    ------
    ModelFormatError
        On invalid JSON (the message carries the character offset), a
        format version other than the current one, or missing fields.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"invalid model file at offset {e.pos}: {e.msg}") from e
    return model_from_dict(obj)
