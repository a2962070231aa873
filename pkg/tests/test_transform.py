import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline

from signbow.dataset import HandTrack
from signbow.transform import BagOfWordsFeatures


def test_shape_and_histograms(small_dataset):
    t = BagOfWordsFeatures(n_codewords=8).fit(small_dataset)
    x = t.transform(small_dataset.samples[:10])
    width = 6 + 16 + 8
    assert x.shape == (10, 2 * width)
    for row, s in zip(x, small_dataset.samples[:10]):
        for hi, h in enumerate(("left", "right")):
            block = row[hi * width:(hi + 1) * width]
            if s.hand(h).n_present:
                assert block[0] == pytest.approx(s.hand(h).n_present / s.n_frames)
                assert block[6 + 16:].sum() == pytest.approx(1.0)
            else:
                assert not block.any()


def test_argmax_quantizer_width(small_dataset):
    x = BagOfWordsFeatures(hs_quantizer="argmax").fit_transform(small_dataset.samples[:5])
    assert x.shape[1] == 2 * (6 + 16 + small_dataset.manifest.handshape_dim)


def test_frame_order_of_handshapes_is_irrelevant(small_dataset):
    t = BagOfWordsFeatures(n_codewords=8).fit(small_dataset)
    s = small_dataset.samples[0]
    hs = s.right.hs.copy()
    idx = np.flatnonzero(s.right.present)
    hs[idx] = s.right.hs[np.random.default_rng(1).permutation(idx)]
    moved = s.replace(right=HandTrack(s.right.present, s.right.pos, hs))
    np.testing.assert_allclose(t.transform([moved]), t.transform([s]), atol=1e-15)


def test_pipeline_with_generic_classifier(small_dataset):
    pipe = make_pipeline(BagOfWordsFeatures(n_codewords=8), LogisticRegression(max_iter=2000))
    pipe.fit(small_dataset.samples, small_dataset.labels)
    assert pipe.score(small_dataset.samples, small_dataset.labels) > 0.8
    assert clone(pipe.steps[0][1]).get_params()["n_codewords"] == 8
