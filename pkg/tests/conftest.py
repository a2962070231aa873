import numpy as np
import pytest

from signbow.dataset import ClassAnnotation, Dataset, HandTrack, Manifest, SignSample
from signbow.synth import GeneratorConfig, generate_dataset, sample_prototypes

# verdict lines of the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)


def make_track(pos, hs=None, present=None, k=4, rng=None):
    """HandTrack from positions; handshapes default to one-hot on index 0."""
    pos = np.asarray(pos, dtype=float).reshape(-1, 2)
    n = len(pos)
    if hs is None:
        hs = np.zeros((n, k))
        hs[:, 0] = 1.0
    hs = np.asarray(hs, dtype=float)
    present = np.ones(n, bool) if present is None else np.asarray(present, bool)
    pos = np.where(present[:, None], pos, np.nan)
    hs = np.where(present[:, None], hs, np.nan)
    return HandTrack(present, pos, hs)


def make_sample(sid="s", subject=1, label=0, left=None, right=None, n=6, k=4):
    n = len(right.present) if right is not None else len(left.present) if left is not None else n
    left = HandTrack.absent(n, k) if left is None else left
    right = HandTrack.absent(n, k) if right is None else right
    return SignSample(sid, subject, label, np.arange(n), left, right)


def two_class_manifest(k=4):
    return Manifest(2, k, (ClassAnnotation(0, "a", False, True),
                           ClassAnnotation(1, "b", True, True)))


@pytest.fixture(scope="session")
def small_config():
    return GeneratorConfig(num_classes=8, num_subjects=3, reps_per_subject=4, seed=3)


@pytest.fixture(scope="session")
def small_prototypes(small_config):
    return sample_prototypes(small_config)


@pytest.fixture(scope="session")
def small_dataset(small_prototypes, small_config) -> Dataset:
    return generate_dataset(small_prototypes, small_config)


@pytest.fixture(scope="session")
def default_config():
    return GeneratorConfig()


@pytest.fixture(scope="session")
def default_prototypes(default_config):
    return sample_prototypes(default_config)


@pytest.fixture(scope="session")
def default_dataset(default_prototypes, default_config) -> Dataset:
    return generate_dataset(default_prototypes, default_config)
