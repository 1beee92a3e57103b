"""scikit-learn compatible front end."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset
from .lipschitz import bound_euclidean, bound_general
from .network import forward, nnz_coeffs, param_count
from .optim import TrainConfig, build_network, train
from .rng import INIT, SHUFFLE, make_rng


class DeepSplineClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier with learnable linear-spline activations.

    A fully connected net ``(n_features, *hidden, 1)`` with a sigmoid output,
    trained on binary cross-entropy plus weight decay ``mu`` and a BV(2)
    penalty ``lam`` on the activations. ``activation`` may also be one of the
    fixed baselines (``relu``, ``leaky_relu``, ``prelu``).

    After ``fit``: ``network_``, ``history_``, ``classes_``, ``n_features_in_``.
    """

    def __init__(self, hidden=(2,), activation="spline", n_knots=21, knot_range=(-1.0, 1.0),
                 mu=1e-4, lam="auto", outer_norm="l1", optimizer="adam", learning_rate=3e-3,
                 epochs=500, batch_size=32, loss_reduction="mean", sparsify_budget=0.01,
                 random_state=0):
        self.hidden = hidden
        self.activation = activation
        self.n_knots = n_knots
        self.knot_range = knot_range
        self.mu = mu
        self.lam = lam
        self.outer_norm = outer_norm
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.loss_reduction = loss_reduction
        self.sparsify_budget = sparsify_budget
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            activation=self.activation, hidden=list(self.hidden), n_knots=self.n_knots,
            knot_range=list(self.knot_range), optimizer=self.optimizer,
            learning_rate=self.learning_rate, epochs=self.epochs, batch_size=self.batch_size,
            mu=self.mu, lam=self.lam, outer_norm=self.outer_norm,
            loss_reduction=self.loss_reduction, sparsify_budget=self.sparsify_budget,
            seed=0 if self.random_state is None else int(self.random_state),
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) > 2:
            raise ValueError(f"only binary targets are supported, got {len(self.classes_)} classes")
        target = (y == self.classes_[-1]).astype(float) if len(self.classes_) == 2 else np.zeros(len(y))
        self.n_features_in_ = X.shape[1]
        cfg = self._config()
        net = build_network(cfg, X.shape[1], make_rng(cfg.seed, INIT))
        self.network_, self.history_ = train(net, Dataset(X, target), cfg, make_rng(cfg.seed, SHUFFLE))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        p = forward(self.network_, X)[0][:, 0]
        return np.column_stack([1.0 - p, p])

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        return forward(self.network_, X, skip_last_activation=True)[0][:, 0]

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        if len(self.classes_) == 1:
            return np.full(len(p), self.classes_[0])
        return self.classes_[(p >= 0.5).astype(int)]

    def lipschitz_bound(self, p=2, outer=None, include_sigmoid=True) -> float:
        """Certified upper bound; ``outer`` selects the Euclidean product bound."""
        check_is_fitted(self, "network_")
        if outer is not None:
            return bound_euclidean(self.network_, outer, include_sigmoid).bound
        return bound_general(self.network_, p, include_sigmoid).bound

    @property
    def n_params_(self) -> int:
        check_is_fitted(self, "network_")
        return param_count(self.network_)

    @property
    def nnz_coeffs_(self) -> int:
        check_is_fitted(self, "network_")
        return nnz_coeffs(self.network_)
