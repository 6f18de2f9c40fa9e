"""scikit-learn compatible wrappers around the layer stacks."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..evaluation import roc_curve
from ..numerics import DEFAULT_SEED, child_seeds
from ..validation import check_batch
from .model import Model, build_architecture, extract_features
from .training import TrainConfig, train
from .weights import load_weights


class TileClassifier(ClassifierMixin, BaseEstimator):
    """Softmax classifier over 50x50 tiles or 512-dim feature vectors.

    Parameters
    ----------
    arch : str
        ``tiny_cnn`` / ``tiny_cnn_7`` for end-to-end training on images,
        ``classifier_head_2`` / ``classifier_head_7`` for training on features.
    epochs, batch_size, learning_rate, optimizer, momentum, train_fraction
        See :class:`TrainConfig`. ``train_fraction`` of each class is used for
        fitting, the rest is held out and reported in ``log_``.
    dropout : float
        Drop probability of every dropout layer.
    positive_class : int
        For two-class models, the class whose probability is scored when the
        held-out ROC (``roc_``, ``best_threshold_``) is computed.
    augmenter : estimator, optional
        Anything with ``transform_xy``; applied to training members only.
    seed : int
        Fans out into the weight-initialisation and training seeds.
    """

    def __init__(self, arch="tiny_cnn", epochs=20, batch_size=32, learning_rate=0.01,
                 optimizer="sgd", momentum=0.0, dropout=0.5, train_fraction=0.7,
                 positive_class=0, augmenter=None, seed=DEFAULT_SEED):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.dropout = dropout
        self.train_fraction = train_fraction
        self.positive_class = positive_class
        self.augmenter = augmenter
        self.seed = seed

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.optimizer,
                           self.momentum, child_seeds(self.seed, 2)[1], self.train_fraction)

    def fit(self, X, y, split=None):
        """Train from scratch; ``split`` optionally fixes (train_index, val_index)."""
        init_seed, _ = child_seeds(self.seed, 2)
        model = build_architecture(self.arch, seed=init_seed, dropout=self.dropout)
        X = check_batch(X, model.input_shape)
        self.model_ = model
        self.classes_ = np.arange(model.n_outputs)
        self.log_ = train(model, X, y, self.train_config(), augmenter=self.augmenter, split=split)
        self._record_validation(X[self.log_.val_index], np.asarray(y)[self.log_.val_index])
        return self

    def _record_validation(self, Xv, yv):
        self.best_threshold_ = None
        self.roc_ = None
        if len(self.classes_) != 2 or len(np.unique(yv)) < 2:
            return
        scores = self.predict_proba(Xv)[:, self.positive_class]
        self.roc_ = roc_curve(scores, yv == self.positive_class)
        self.best_threshold_ = self.roc_.best_threshold

    @classmethod
    def from_model(cls, model: Model, best_threshold: float | None = None) -> "TileClassifier":
        """Wrap an already-trained model (e.g. from :func:`load_weights`)."""
        est = cls(arch=model.name)
        est.model_ = model
        est.classes_ = np.arange(model.n_outputs)
        est.best_threshold_ = best_threshold
        return est

    @classmethod
    def load(cls, path, best_threshold: float | None = None) -> "TileClassifier":
        return cls.from_model(load_weights(path), best_threshold)

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_batch(X, self.model_.input_shape)
        return self.model_.predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


class FeatureExtractor(TransformerMixin, BaseEstimator):
    """Headless VGG16 mapping 50x50x3 images to 512-dim vectors.

    ``weights`` is a TPWF file holding ``vgg16_headless`` parameters; without
    one the network gets seeded random weights.
    """

    def __init__(self, weights=None, seed=DEFAULT_SEED, dtype="float32"):
        self.weights = weights
        self.seed = seed
        self.dtype = dtype

    def fit(self, X=None, y=None):
        if self.weights is None:
            self.model_ = build_architecture("vgg16_headless", seed=self.seed)
        else:
            self.model_ = load_weights(self.weights, arch="vgg16_headless")
        return self

    @classmethod
    def from_model(cls, model: Model) -> "FeatureExtractor":
        est = cls()
        est.model_ = model
        return est

    def transform(self, X):
        if not hasattr(self, "model_"):
            self.fit()
        X = check_batch(X, self.model_.input_shape)
        return extract_features(self.model_, X, dtype=np.dtype(self.dtype))
