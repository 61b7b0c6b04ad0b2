"""scikit-learn compatible wrappers around the preprocessing, extractor and classifier."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import cnn, preprocess, trainer, vit


def _as_images(X):
    if isinstance(X, np.ndarray) and X.ndim == 4:
        return [preprocess.Image(x) for x in X]
    return [x if isinstance(x, preprocess.Image) else preprocess.Image(np.asarray(x)) for x in X]


class ThumbnailNormalizer(TransformerMixin, BaseEstimator):
    """Thumbnail resize followed by min-max normalisation.

    ``transform`` takes a sequence of :class:`~leafvit.preprocess.Image` (or a
    uint8 array of shape (n, H, W, 3)) and returns a float array of shape
    (n, H', W', 3). All inputs must resize to the same shape.
    """

    def __init__(self, target_width=64, new_min=0.0, new_max=1.0, per_channel=False):
        self.target_width = target_width
        self.new_min = new_min
        self.new_max = new_max
        self.per_channel = per_channel

    def fit(self, X, y=None):
        if self.target_width < 1:
            raise ValueError(f"target_width must be >= 1, got {self.target_width}")
        if not self.new_max > self.new_min:
            raise ValueError("new_max must exceed new_min")
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self)
        out = []
        for img in _as_images(X):
            small = preprocess.thumbnail_resize(img, self.target_width)
            out.append(preprocess.minmax_normalize(small, self.new_min, self.new_max, self.per_channel).pixels)
        shapes = {o.shape for o in out}
        if len(shapes) > 1:
            raise ValueError(f"images resize to differing shapes {sorted(shapes)}")
        return np.stack(out)


class ViTFeatureExtractor(TransformerMixin, BaseEstimator):
    """Frozen ViT front end. ``fit`` only builds (or loads) the weights.

    Parameters mirror :class:`~leafvit.vit.ViTConfig`; ``weights`` may be a
    ``name -> array`` mapping such as one read from a VITL file.
    """

    def __init__(self, image_size=64, patch_size=8, embed_dim=64, num_layers=4, num_heads=4,
                 mlp_dim=128, variant="none", tail_features=1024, blockwise_factor=0.75,
                 ffn_activation="outer", seed=0, weights=None):
        self.image_size = image_size
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.mlp_dim = mlp_dim
        self.variant = variant
        self.tail_features = tail_features
        self.blockwise_factor = blockwise_factor
        self.ffn_activation = ffn_activation
        self.seed = seed
        self.weights = weights

    def fit(self, X=None, y=None):
        self.config_ = vit.ViTConfig(
            image_size=self.image_size, patch_size=self.patch_size, embed_dim=self.embed_dim,
            num_layers=self.num_layers, num_heads=self.num_heads, mlp_dim=self.mlp_dim,
            variant=self.variant, tail_features=self.tail_features,
            blockwise_factor=self.blockwise_factor, seed=self.seed,
            ffn_activation=self.ffn_activation,
        )
        if self.weights is None:
            self.weights_ = vit.init_weights(self.config_)
        else:
            self.weights_ = vit.ViTWeights.from_tensors(self.weights, self.config_)
        self.n_features_out_ = self.config_.feature_length
        return self

    def transform(self, X):
        check_is_fitted(self, "weights_")
        X = np.asarray([getattr(x, "pixels", x) for x in X], dtype=np.float64)
        if X.ndim != 4:
            raise ValueError(f"expected images of shape (n, H, W, 3), got {X.shape}")
        return np.stack([vit.extract(x, self.config_, self.weights_) for x in X])


class CNNClassifier(ClassifierMixin, BaseEstimator):
    """Convolutional head trained with Adam, early stopping and best-weight restore.

    ``conv_filters``, ``dense_units`` and ``dropout_rate`` override the preset
    named by ``arch`` when not ``None``. Validation data passed to ``fit``
    drives checkpointing; without it a seeded 10% stratified slice of the
    training data is held out (at least one sample per class).
    """

    def __init__(self, arch="arch2", conv_filters=None, dense_units=None, dropout_rate=None,
                 learning_rate=0.001, batch_size=32, max_epochs=50, patience=25, seed=0):
        self.arch = arch
        self.conv_filters = conv_filters
        self.dense_units = dense_units
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    def _train_config(self):
        return trainer.TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            max_epochs=self.max_epochs, patience=self.patience, seed=self.seed,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        codes = np.searchsorted(self.classes_, y)
        if X_val is None:
            tr, va, te = trainer.stratified_split(codes, (0.8, 0.1, 0.1), self.seed)
            tr = np.concatenate([tr, te])
            # small classes floor to an empty validation share; lend them one sample each
            for k in np.setdiff1d(np.arange(len(self.classes_)), codes[va]):
                pick = tr[codes[tr] == k][0]
                tr, va = tr[tr != pick], np.append(va, pick)
            X, codes, X_val, val_codes = X[tr], codes[tr], X[va], codes[va]
        else:
            X_val = check_array(X_val, dtype=np.float64)
            val_codes = np.searchsorted(self.classes_, np.asarray(y_val))
        overrides = {k: v for k, v in (("conv_filters", self.conv_filters),
                                       ("dense_units", self.dense_units),
                                       ("dropout_rate", self.dropout_rate)) if v is not None}
        if "conv_filters" in overrides:
            overrides["conv_filters"] = tuple(overrides["conv_filters"])
        self.spec_ = cnn.architecture(self.arch, len(self.classes_), **overrides)
        self.weights_, self.history_ = trainer.train(
            X, codes, X_val, val_codes, self.spec_, self._train_config()
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        return cnn.forward(X, self.spec_, self.weights_)

    def predict(self, X):
        check_is_fitted(self, "weights_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
