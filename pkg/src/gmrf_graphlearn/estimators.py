"""Transductive graph predictors with a scikit-learn style interface.

Estimators take the graph and hyperparameters at construction; ``fit``
receives the labeled node indices, their outcome values, and (where the
method uses them) the feature matrix for all nodes. ``predict`` returns
predictions for every node by default, or for a requested index set.
``get_params`` / ``set_params`` / ``clone`` work as usual, so the
estimators compose with generic hyperparameter search.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone

from .evaluation import f1_score
from .smoothing import (
    PropagationBudget,
    SmoothingParam,
    _constrained_fixed_point,
    _constrained_solve_cg,
    _rel_change,
    _warn_budget,
    smooth_features,
)
from .graph import apply_selfloop_adjacency
from .validation import check_matrix, check_node_index_set, check_vector

OLS_RCOND = 1e-10


def ols(features, targets):
    """Least-squares coefficients; rank deficiency falls back to the
    minimum-norm solution (relative singular-value cutoff 1e-10)."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if features.ndim != 2 or features.shape[0] != targets.shape[0]:
        raise ValueError("features and targets must have matching rows")
    if features.shape[0] < 1:
        raise ValueError("at least one training row is required")
    coef, _, _, _ = np.linalg.lstsq(features, targets, rcond=OLS_RCOND)
    return coef


def classify_by_threshold(scores, threshold):
    """Binary labels: 1.0 where the score reaches the threshold, else 0.0."""
    scores = np.asarray(scores, dtype=float)
    return np.where(scores >= threshold, 1.0, 0.0)


def tune_threshold(scores, labels):
    """Cut-off maximizing F1 of class 1 on validation scores.

    Candidates are the smallest score (predict everything positive) plus
    the midpoints of consecutive distinct scores; ties resolve toward the
    smaller threshold.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.size == 0:
        raise ValueError("validation set must be nonempty")
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    distinct = np.unique(scores)
    candidates = np.concatenate([[distinct[0]], (distinct[:-1] + distinct[1:]) / 2.0])
    best_threshold, best_f1 = candidates[0], -1.0
    for t in candidates:
        score = f1_score(classify_by_threshold(scores, t), labels, positive_class=1.0)
        if score > best_f1:
            best_threshold, best_f1 = t, score
    return float(best_threshold)


class FeatureSmoother(TransformerMixin, BaseEstimator):
    """Transformer applying graph smoothing to per-node feature columns."""

    def __init__(self, graph, omega=1.0, max_iterations=1000, tol=1e-9, executor="iteration"):
        self.graph = graph
        self.omega = omega
        self.max_iterations = max_iterations
        self.tol = tol
        self.executor = executor

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return smooth_features(
            self.graph,
            check_matrix(X, self.graph.n, name="X"),
            SmoothingParam(self.omega),
            PropagationBudget(self.max_iterations, self.tol),
            executor=self.executor,
        )


class _GraphPredictor(BaseEstimator):
    """Shared fit/predict plumbing for the transductive regressors."""

    uses_features = False

    def _budget(self):
        return PropagationBudget(self.max_iterations, self.tol)

    def _validate_fit(self, train_index, train_values, features):
        train_index = check_node_index_set(train_index, self.graph.n, "train_index")
        if train_index.size == 0:
            raise ValueError("at least one labeled node is required")
        train_values = check_vector(train_values, train_index.size, "train_values")
        if self.uses_features:
            if features is None:
                raise ValueError(f"{type(self).__name__} requires a feature matrix")
            features = check_matrix(features, self.graph.n, name="features")
        return train_index, train_values, features

    def predict(self, index=None):
        if not hasattr(self, "predictions_"):
            raise RuntimeError("estimator is not fitted")
        if index is None:
            return self.predictions_.copy()
        index = check_node_index_set(index, self.graph.n, "index")
        return self.predictions_[index]

    def fit_predict(self, train_index, train_values, features=None, index=None):
        return self.fit(train_index, train_values, features).predict(index)


class LabelPropagation(_GraphPredictor):
    """Outcome diffusion with observed nodes pinned to their values.

    Unlabeled predictions converge to the solution of the pinned-block
    linear system in ``I + omega N``; labeled nodes predict their observed
    values.
    """

    def __init__(self, graph, omega=1.0, max_iterations=1000, tol=1e-9, executor="iteration"):
        self.graph = graph
        self.omega = omega
        self.max_iterations = max_iterations
        self.tol = tol
        self.executor = executor

    def fit(self, train_index, train_values, features=None):
        train_index, train_values, _ = self._validate_fit(train_index, train_values, features)
        s = SmoothingParam(self.omega)
        if self.executor == "cg":
            full = _constrained_solve_cg(self.graph, train_values, train_index, s.omega, self._budget())
            self.n_iter_, self.converged_ = None, True
        else:
            full, self.n_iter_, self.converged_, change = _constrained_fixed_point(
                self.graph, train_values, train_index, s.alpha, self._budget()
            )
            if not self.converged_:
                _warn_budget(self._budget(), change, "label propagation")
        self.train_index_ = train_index
        self.predictions_ = full
        return self


class LinearGraphConvolution(_GraphPredictor):
    """Least squares on graph-smoothed features.

    Features are smoothed toward ``(I + omega N)^{-1} X`` before an
    ordinary least-squares fit on the labeled rows; ``omega = 0`` is plain
    linear regression. A coefficient vector can be supplied to bypass the
    least-squares step.
    """

    uses_features = True

    def __init__(
        self, graph, omega=1.0, max_iterations=1000, tol=1e-9, executor="iteration", beta=None
    ):
        self.graph = graph
        self.omega = omega
        self.max_iterations = max_iterations
        self.tol = tol
        self.executor = executor
        self.beta = beta

    def _smoothed(self, graph, features):
        # Re-smoothing dominates refit cost, so cache per (params, array).
        key = (
            id(graph),
            float(self.omega),
            self.max_iterations,
            self.tol,
            self.executor,
            id(features),
            features.shape,
        )
        cached = getattr(self, "_smooth_cache", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        smoothed = smooth_features(
            graph, features, SmoothingParam(self.omega), self._budget(), executor=self.executor
        )
        self._smooth_cache = (key, smoothed)
        return smoothed

    def fit(self, train_index, train_values, features=None):
        train_index, train_values, features = self._validate_fit(
            train_index, train_values, features
        )
        smoothed = self._smoothed(self.graph, features)
        if self.beta is not None:
            self.coef_ = check_vector(self.beta, features.shape[1], "beta")
        else:
            self.coef_ = ols(smoothed[train_index], train_values)
        self.train_index_ = train_index
        self.predictions_ = smoothed @ self.coef_
        return self

    def predict_on(self, graph, features, index=None):
        """Inductive prediction: smooth the other graph's features and apply
        the fitted coefficients."""
        if not hasattr(self, "coef_"):
            raise RuntimeError("estimator is not fitted")
        features = check_matrix(features, graph.n, name="features")
        smoothed = self._smoothed(graph, features)
        preds = smoothed @ self.coef_
        if index is None:
            return preds
        return preds[check_node_index_set(index, graph.n, "index")]


class SimpleGraphConvolution(_GraphPredictor):
    """Least squares on features averaged by repeated self-loop convolution.

    Applies the self-loop normalized adjacency ``n_layers`` times before
    fitting coefficients on the labeled rows; ``n_layers = 0`` is plain
    linear regression.
    """

    uses_features = True

    def __init__(self, graph, n_layers=2):
        self.graph = graph
        self.n_layers = n_layers

    def _convolved(self, graph, features):
        if self.n_layers < 0:
            raise ValueError("n_layers must be nonnegative")
        out = features.copy()
        for _ in range(self.n_layers):
            out = apply_selfloop_adjacency(graph, out)
        return out

    def fit(self, train_index, train_values, features=None):
        train_index, train_values, features = self._validate_fit(
            train_index, train_values, features
        )
        convolved = self._convolved(self.graph, features)
        self.coef_ = ols(convolved[train_index], train_values)
        self.train_index_ = train_index
        self.predictions_ = convolved @ self.coef_
        return self

    def predict_on(self, graph, features, index=None):
        if not hasattr(self, "coef_"):
            raise RuntimeError("estimator is not fitted")
        features = check_matrix(features, graph.n, name="features")
        preds = self._convolved(graph, features) @ self.coef_
        if index is None:
            return preds
        return preds[check_node_index_set(index, graph.n, "index")]


class ResidualPropagation(_GraphPredictor):
    """Base predictor corrected by propagating its labeled-node residuals.

    With ``base=None`` the base prediction is zero, so the estimator
    reduces exactly to label propagation on the raw outcomes. The
    propagation strength may differ from the base predictor's.
    """

    def __init__(self, graph, base=None, omega=1.0, max_iterations=1000, tol=1e-9, executor="iteration"):
        self.graph = graph
        self.base = base
        self.omega = omega
        self.max_iterations = max_iterations
        self.tol = tol
        self.executor = executor

    @property
    def uses_features(self):
        return self.base is not None and getattr(self.base, "uses_features", False)

    def fit(self, train_index, train_values, features=None):
        train_index, train_values, features = self._validate_fit(
            train_index, train_values, features
        )
        if self.base is None:
            base_full = np.zeros(self.graph.n)
            self.base_ = None
        else:
            if self.base.graph.n != self.graph.n:
                raise ValueError("base estimator must share the graph")
            self.base_ = clone(self.base)
            self.base_.fit(train_index, train_values, features)
            base_full = self.base_.predict()
        residuals = train_values - base_full[train_index]
        s = SmoothingParam(self.omega)
        if self.executor == "cg":
            spread = _constrained_solve_cg(
                self.graph, residuals, train_index, s.omega, self._budget()
            )
            self.n_iter_, self.converged_ = None, True
        else:
            spread, self.n_iter_, self.converged_, change = _constrained_fixed_point(
                self.graph, residuals, train_index, s.alpha, self._budget()
            )
            if not self.converged_:
                _warn_budget(self._budget(), change, "residual propagation")
        self.train_index_ = train_index
        self.predictions_ = base_full + spread
        return self


def make_lgc_rp(graph, omega=1.0, rp_omega=None, max_iterations=1000, tol=1e-9, executor="iteration"):
    """Smoothed-feature regression followed by residual propagation.

    By default both stages share one smoothing strength (the model ties
    them); pass ``rp_omega`` to let the correction stage differ.
    """
    base = LinearGraphConvolution(
        graph, omega=omega, max_iterations=max_iterations, tol=tol, executor=executor
    )
    return ResidualPropagation(
        graph,
        base=base,
        omega=omega if rp_omega is None else rp_omega,
        max_iterations=max_iterations,
        tol=tol,
        executor=executor,
    )


class ThresholdClassifier(BaseEstimator):
    """Binary classifier thresholding a regressor's continuous scores."""

    def __init__(self, base, threshold=0.5):
        self.base = base
        self.threshold = threshold

    def fit(self, train_index, train_labels, features=None):
        labels = np.asarray(train_labels, dtype=float)
        if not np.all(np.isin(labels, (0.0, 1.0))):
            raise ValueError("labels must be encoded as 0.0 / 1.0")
        self.base_ = clone(self.base)
        self.base_.fit(train_index, labels, features)
        return self

    def predict_scores(self, index=None):
        return self.base_.predict(index)

    def predict(self, index=None):
        return classify_by_threshold(self.predict_scores(index), self.threshold)
