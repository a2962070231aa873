"""Feature-track data model, JSON-lines I/O, validation and splitting.

A sample stores each hand as a dense :class:`HandTrack` (presence mask,
positions, handshape probability vectors). Absent frames carry NaN rows.
The per-frame :class:`Frame` / :class:`HandObservation` view is available
through :attr:`SignSample.frames` and :meth:`SignSample.from_frames`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import DataValidationError, ParseError

HANDS = ("left", "right")
_HAND_KEYS = {"left": "l", "right": "r"}
HS_SUM_TOL = 1e-6


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class HandObservation:
    present: bool
    pos: Point2 | None = None
    hs: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Frame:
    t: int
    left: HandObservation
    right: HandObservation


@dataclass(frozen=True, eq=False)
class HandTrack:
    """Dense per-frame observations of one hand.

    Attributes
    ----------
    present : ndarray of shape (n_frames,), bool
    pos : ndarray of shape (n_frames, 2)
        Head-relative position in centimeters, NaN where absent.
    hs : ndarray of shape (n_frames, n_handshapes)
        Handshape probability vector, NaN where absent.
    """

    present: np.ndarray
    pos: np.ndarray
    hs: np.ndarray

    @classmethod
    def absent(cls, n_frames: int, n_handshapes: int) -> "HandTrack":
        return cls(
            np.zeros(n_frames, dtype=bool),
            np.full((n_frames, 2), np.nan),
            np.full((n_frames, n_handshapes), np.nan),
        )

    @property
    def n_present(self) -> int:
        return int(np.count_nonzero(self.present))

    @property
    def positions(self) -> np.ndarray:
        """Positions of the present frames, in frame order."""
        return self.pos[self.present]

    @property
    def handshapes(self) -> np.ndarray:
        return self.hs[self.present]

    def __eq__(self, other):
        if not isinstance(other, HandTrack):
            return NotImplemented
        return (
            np.array_equal(self.present, other.present)
            and np.array_equal(self.pos, other.pos, equal_nan=True)
            and np.array_equal(self.hs, other.hs, equal_nan=True)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SignSample:
    id: str
    subject: int
    label: int | None
    t: np.ndarray
    left: HandTrack
    right: HandTrack

    @property
    def n_frames(self) -> int:
        return len(self.t)

    @property
    def n_handshapes(self) -> int:
        return self.left.hs.shape[1]

    def hand(self, name: str) -> HandTrack:
        if name == "left":
            return self.left
        if name == "right":
            return self.right
        raise ValueError(f"unknown hand {name!r}")

    @property
    def frames(self) -> list[Frame]:
        out = []
        for i, t in enumerate(self.t):
            obs = []
            for track in (self.left, self.right):
                if track.present[i]:
                    obs.append(HandObservation(
                        True, Point2(*map(float, track.pos[i])), tuple(map(float, track.hs[i]))))
                else:
                    obs.append(HandObservation(False))
            out.append(Frame(int(t), *obs))
        return out

    @classmethod
    def from_frames(cls, id: str, subject: int, label: int | None,
                    frames: Sequence[Frame], n_handshapes: int) -> "SignSample":
        n = len(frames)
        tracks = {h: HandTrack.absent(n, n_handshapes) for h in HANDS}
        for i, fr in enumerate(frames):
            for h in HANDS:
                ob = getattr(fr, h)
                if ob.present:
                    tracks[h].present[i] = True
                    if ob.pos is not None:
                        tracks[h].pos[i] = ob.pos
                    if ob.hs is not None:
                        tracks[h].hs[i] = ob.hs
        t = np.array([fr.t for fr in frames], dtype=np.int64)
        return cls(id, subject, label, t, tracks["left"], tracks["right"])

    def replace(self, **changes) -> "SignSample":
        fields = dict(id=self.id, subject=self.subject, label=self.label,
                      t=self.t, left=self.left, right=self.right)
        fields.update(changes)
        return SignSample(**fields)

    def __eq__(self, other):
        if not isinstance(other, SignSample):
            return NotImplemented
        return (
            self.id == other.id
            and self.subject == other.subject
            and self.label == other.label
            and np.array_equal(self.t, other.t)
            and self.left == other.left
            and self.right == other.right
        )

    __hash__ = None


@dataclass(frozen=True)
class ClassAnnotation:
    class_id: int
    name: str
    uses_left: bool
    uses_right: bool

    @property
    def one_handed(self) -> bool:
        return self.uses_left != self.uses_right

    def uses(self, hand: str) -> bool:
        return self.uses_left if hand == "left" else self.uses_right


@dataclass(frozen=True)
class Manifest:
    num_classes: int
    handshape_dim: int
    classes: tuple[ClassAnnotation, ...]

    @property
    def class_ids(self) -> list[int]:
        return [c.class_id for c in self.classes]

    def annotation(self, class_id: int) -> ClassAnnotation:
        for c in self.classes:
            if c.class_id == class_id:
                return c
        raise KeyError(class_id)

    def restrict(self, class_ids: Iterable[int]) -> "Manifest":
        keep = set(class_ids)
        classes = tuple(c for c in self.classes if c.class_id in keep)
        return Manifest(len(classes), self.handshape_dim, classes)


@dataclass(frozen=True)
class Dataset:
    manifest: Manifest
    samples: tuple[SignSample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self):
        return len(self.samples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples])

    @property
    def subjects(self) -> np.ndarray:
        return np.array([s.subject for s in self.samples])

    def subset(self, indices) -> "Dataset":
        return Dataset(self.manifest, tuple(self.samples[i] for i in indices))

    def restrict_classes(self, class_ids: Iterable[int]) -> "Dataset":
        manifest = self.manifest.restrict(class_ids)
        keep = set(manifest.class_ids)
        return Dataset(manifest, tuple(s for s in self.samples if s.label in keep))


# ---------------------------------------------------------------- validation

def validate_manifest(manifest: Manifest) -> list[str]:
    problems = []
    ids = manifest.class_ids
    if manifest.handshape_dim < 1:
        problems.append("handshape_dim must be >= 1")
    if len(ids) != manifest.num_classes:
        problems.append(
            f"num_classes={manifest.num_classes} but {len(ids)} classes listed")
    if len(set(ids)) != len(ids):
        problems.append("duplicate class ids in manifest")
    for c in manifest.classes:
        if not (c.uses_left or c.uses_right):
            problems.append(f"class {c.class_id} uses neither hand")
    return problems


def validate_sample(s: SignSample, n_handshapes: int) -> list[str]:
    """Return the list of invariant violations of ``s``; empty when valid."""
    v = []
    if s.n_frames < 1:
        v.append("sample has no frames")
    if s.subject < 1:
        v.append(f"subject must be >= 1, got {s.subject}")
    if s.n_frames > 0:
        if s.t[0] < 0:
            v.append("frame index must be non-negative")
        if np.any(np.diff(s.t) <= 0):
            v.append("frame indices not strictly increasing")
    for h in HANDS:
        track = s.hand(h)
        if track.hs.shape[1] != n_handshapes:
            v.append(f"{h}: handshape dim {track.hs.shape[1]} != {n_handshapes}")
            continue
        if not (len(track.present) == len(track.pos) == len(track.hs) == s.n_frames):
            v.append(f"{h}: track length does not match frame count")
            continue
        idx = np.flatnonzero(track.present)
        for i in idx:
            pos, hs = track.pos[i], track.hs[i]
            if not np.all(np.isfinite(pos)):
                v.append(f"{h} frame {i}: present but position missing or non-finite")
            if not np.all(np.isfinite(hs)):
                v.append(f"{h} frame {i}: present but handshape missing or non-finite")
            elif np.any(hs < 0) or np.any(hs > 1):
                v.append(f"{h} frame {i}: handshape entry outside [0, 1]")
            elif abs(hs.sum() - 1.0) > HS_SUM_TOL:
                v.append(f"{h} frame {i}: handshape sums to {hs.sum():.6g}, not 1")
    return v


def validate_dataset(d: Dataset) -> list[str]:
    problems = validate_manifest(d.manifest)
    known = set(d.manifest.class_ids)
    seen = set()
    for s in d.samples:
        if s.id in seen:
            problems.append(f"sample {s.id}: duplicate id")
        seen.add(s.id)
        if s.label is not None and s.label not in known:
            problems.append(f"sample {s.id}: unknown class {s.label}")
        problems.extend(f"sample {s.id}: {msg}"
                        for msg in validate_sample(s, d.manifest.handshape_dim))
    return problems


# ----------------------------------------------------------------------- I/O

def _parse_hand(obj, n_frames, i, track, k, line):
    if not isinstance(obj, dict) or "present" not in obj:
        raise ParseError(f"frame {i}: hand record must be an object with 'present'", line)
    if not obj["present"]:
        return
    track.present[i] = True
    pos = obj.get("pos")
    if pos is not None:
        if len(pos) != 2:
            raise ParseError(f"frame {i}: pos must have 2 coordinates", line)
        track.pos[i] = pos
    hs = obj.get("hs")
    if hs is not None:
        if len(hs) != k:
            raise DataValidationError(
                f"line {line}: frame {i}: handshape dim {len(hs)} != manifest {k}")
        track.hs[i] = hs


def sample_from_record(rec: dict, n_handshapes: int, line: int | None = None) -> SignSample:
    try:
        frames = rec["frames"]
        sid = str(rec["id"])
        subject = int(rec["subject"])
        label = rec.get("class")
        label = None if label is None else int(label)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed sample record: {exc!r}", line) from None
    n = len(frames)
    left = HandTrack.absent(n, n_handshapes)
    right = HandTrack.absent(n, n_handshapes)
    t = np.empty(n, dtype=np.int64)
    try:
        for i, fr in enumerate(frames):
            t[i] = int(fr["t"])
            _parse_hand(fr["l"], n, i, left, n_handshapes, line)
            _parse_hand(fr["r"], n, i, right, n_handshapes, line)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (ParseError, DataValidationError)):
            raise
        raise ParseError(f"sample {sid}: malformed frame: {exc!r}", line) from None
    return SignSample(sid, subject, label, t, left, right)


def _hand_record(track: HandTrack, i: int) -> dict:
    if not track.present[i]:
        return {"present": False}
    return {"present": True,
            "pos": [float(x) for x in track.pos[i]],
            "hs": [float(x) for x in track.hs[i]]}


def sample_to_record(s: SignSample) -> dict:
    frames = [{"t": int(s.t[i]), "l": _hand_record(s.left, i), "r": _hand_record(s.right, i)}
              for i in range(s.n_frames)]
    return {"id": s.id, "subject": int(s.subject), "class": s.label, "frames": frames}


def manifest_from_dict(obj: dict) -> Manifest:
    try:
        classes = tuple(
            ClassAnnotation(int(c["id"]), str(c.get("name", c["id"])),
                            bool(c["uses_left"]), bool(c["uses_right"]))
            for c in obj["classes"])
        return Manifest(int(obj["num_classes"]), int(obj["handshape_dim"]), classes)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest: {exc!r}") from None


def manifest_to_dict(m: Manifest) -> dict:
    return {
        "num_classes": m.num_classes,
        "handshape_dim": m.handshape_dim,
        "classes": [{"id": c.class_id, "name": c.name,
                     "uses_left": c.uses_left, "uses_right": c.uses_right}
                    for c in m.classes],
    }


def load_manifest(path) -> Manifest:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest {path}: {exc.msg} at offset {exc.pos}", exc.lineno) from None
    manifest = manifest_from_dict(obj)
    problems = validate_manifest(manifest)
    if problems:
        raise DataValidationError("; ".join(problems))
    return manifest


def read_samples(path, n_handshapes: int) -> list[SignSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise ParseError("record must be a JSON object", lineno)
            samples.append(sample_from_record(rec, n_handshapes, lineno))
    return samples


def load_dataset(samples_path, manifest_path) -> Dataset:
    """Load and validate a samples file against its manifest.

    Raises
    ------
    ParseError
        Malformed JSON or record structure (line number included).
    DataValidationError
        Any invariant violation; the message names the offending samples.
    """
    manifest = load_manifest(manifest_path)
    d = Dataset(manifest, read_samples(samples_path, manifest.handshape_dim))
    problems = validate_dataset(d)
    if problems:
        shown = "; ".join(problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        raise DataValidationError(shown + more)
    return d


def save_dataset(d: Dataset, samples_path, manifest_path) -> None:
    with open(samples_path, "w", encoding="utf-8") as fh:
        for s in d.samples:
            fh.write(json.dumps(sample_to_record(s), separators=(",", ":")))
            fh.write("\n")
    Path(manifest_path).write_text(
        json.dumps(manifest_to_dict(d.manifest), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- splitting

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_stratified(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per-class random split; ``round_half_up(train_fraction * n_c)`` go to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    labels = d.labels
    train_idx = []
    for c in sorted(d.manifest.class_ids):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            raise DataValidationError(f"class {c} has {len(idx)} samples; need >= 2 to split")
        perm = rng.permutation(idx)
        train_idx.extend(perm[:_round_half_up(train_fraction * len(idx))].tolist())
    in_train = np.zeros(len(d), dtype=bool)
    in_train[train_idx] = True
    return d.subset(np.flatnonzero(in_train)), d.subset(np.flatnonzero(~in_train))


def split_by_subject(d: Dataset, held_out_subject: int) -> tuple[Dataset, Dataset]:
    subjects = d.subjects
    test = subjects == held_out_subject
    if not test.any():
        raise DataValidationError(f"subject {held_out_subject} does not occur in the dataset")
    if test.all():
        raise DataValidationError(
            f"holding out subject {held_out_subject} leaves an empty training set")
    return d.subset(np.flatnonzero(~test)), d.subset(np.flatnonzero(test))
