import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from leafvit import CNNClassifier, ThumbnailNormalizer, ViTFeatureExtractor, vit
from leafvit.preprocess import Image

SMALL_VIT = dict(image_size=16, patch_size=8, embed_dim=8, num_layers=2, num_heads=2, mlp_dim=8)


def test_params_and_clone():
    est = CNNClassifier(arch="arch1", dense_units=16, max_epochs=3, patience=2)
    params = est.get_params()
    assert params["dense_units"] == 16 and params["arch"] == "arch1"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(seed=4)
    assert est.seed == 4
    assert clone(ViTFeatureExtractor(**SMALL_VIT)).get_params()["embed_dim"] == 8


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        CNNClassifier().predict(np.zeros((1, 4)))
    with pytest.raises(NotFittedError):
        ThumbnailNormalizer().transform([])


def test_thumbnail_normalizer(random_image):
    imgs = [random_image(32, 24) for _ in range(3)]
    out = ThumbnailNormalizer(target_width=16).fit(imgs).transform(imgs)
    assert out.shape == (3, 12, 16, 3)
    for o in out:
        assert o.min() == 0.0 and o.max() == 1.0
    stacked = np.stack([i.pixels for i in imgs])
    assert np.array_equal(ThumbnailNormalizer(target_width=16).fit_transform(stacked), out)
    with pytest.raises(ValueError):
        ThumbnailNormalizer(target_width=16).fit_transform([random_image(32, 24), random_image(32, 8)])
    with pytest.raises(ValueError):
        ThumbnailNormalizer(new_min=1, new_max=1).fit(imgs)


@pytest.mark.parametrize("variant, length", [("none", 32), ("tail", 10), ("blockwise", 24)])
def test_feature_extractor_lengths(variant, length, rng):
    est = ViTFeatureExtractor(**SMALL_VIT, variant=variant, tail_features=10).fit()
    assert est.n_features_out_ == length
    x = rng.uniform(0, 1, (2, 16, 16, 3))
    feats = est.transform(x)
    assert feats.shape == (2, length)
    ref = vit.extract(x[0], est.config_, est.weights_)
    assert np.array_equal(feats[0], ref)


def test_feature_extractor_loads_weights(rng):
    base = ViTFeatureExtractor(**SMALL_VIT, seed=3).fit()
    loaded = ViTFeatureExtractor(**SMALL_VIT, seed=99, weights=base.weights_.to_tensors()).fit()
    x = rng.uniform(0, 1, (1, 16, 16, 3))
    assert np.array_equal(base.transform(x), loaded.transform(x))
    with pytest.raises(ValueError):
        ViTFeatureExtractor(**SMALL_VIT).transform(x)


def blobs(n_per_class, dim=16, seed=0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.uniform(0, 0.3, (n_per_class, dim)), rng.uniform(0.7, 1.0, (n_per_class, dim))])
    return x, np.array(["rust"] * n_per_class + ["healthy"] * n_per_class)


def test_classifier_fit_predict_string_labels():
    x, y = blobs(20)
    clf = CNNClassifier(arch="arch1", conv_filters=(2, 2), dense_units=8, learning_rate=0.01,
                        max_epochs=30, patience=10).fit(x, y)
    assert list(clf.classes_) == ["healthy", "rust"]
    assert clf.n_features_in_ == 16
    proba = clf.predict_proba(x)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert clf.score(x, y) == 1.0
    assert len(clf.history_.records) <= 30


def test_classifier_with_explicit_validation_is_deterministic():
    x, y = blobs(10)
    xv, yv = blobs(3, seed=1)
    kw = dict(arch="arch2", conv_filters=(2, 2), dense_units=4, max_epochs=4, patience=4, seed=2)
    a = CNNClassifier(**kw).fit(x, y, xv, yv)
    b = CNNClassifier(**kw).fit(x, y, xv, yv)
    assert np.array_equal(a.predict_proba(x), b.predict_proba(x))


def test_classifier_input_validation():
    with pytest.raises(ValueError):
        CNNClassifier().fit(np.zeros((6, 4)), np.zeros(6))
    with pytest.raises(ValueError):
        CNNClassifier().fit(np.zeros((6, 4)), np.zeros(5))
    x, y = blobs(5)
    clf = CNNClassifier(conv_filters=(2, 2), dense_units=4, max_epochs=1, patience=1).fit(x, y)
    with pytest.raises(ValueError):
        clf.predict(np.zeros((1, 7)))


def test_end_to_end_sklearn_pipeline(random_image):
    imgs = np.stack([random_image(32, 32).pixels for _ in range(12)])
    y = np.repeat([0, 1], 6)
    imgs[y == 1, :, :16] = 255
    pipe = make_pipeline(
        ThumbnailNormalizer(target_width=16),
        ViTFeatureExtractor(**SMALL_VIT),
        CNNClassifier(arch="arch1", conv_filters=(2, 2), dense_units=4, max_epochs=2, patience=2),
    )
    preds = pipe.fit(imgs, y).predict(imgs)
    assert preds.shape == (12,)
    assert set(preds) <= {0, 1}
