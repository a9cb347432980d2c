"""Linearized belief propagation for categorical labels under homophily.

Beliefs are kept as residuals around the uniform distribution: each row of
the belief matrix sums to zero. The update adds, for every neighbor, a
fraction ``epsilon / c`` of its residual belief (with the unnormalized
adjacency), which contracts whenever ``epsilon`` is below ``c`` divided by
the adjacency spectral radius.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning

from .smoothing import PropagationBudget
from .validation import check_matrix, check_node_index_set, complement_index_set

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LinBpConfig:
    num_classes: int
    epsilon: float
    budget: PropagationBudget = field(default_factory=PropagationBudget)

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def estimate_spectral_radius(g, iterations=100):
    """Power-iteration estimate of the adjacency spectral radius.

    Starts from the all-ones vector; on a nonnegative adjacency this
    converges to the Perron eigenvalue. Deterministic.
    """
    if g.num_edges == 0:
        return 0.0
    v = np.ones(g.n) / np.sqrt(g.n)
    radius = 0.0
    for _ in range(iterations):
        w = g.adjacency @ v
        radius = np.linalg.norm(w)
        if radius == 0.0:
            return 0.0
        v = w / radius
    return float(radius)


def check_contraction(cfg, g):
    """Enforce ``epsilon < num_classes / spectral_radius`` so the fixed
    point exists and the iteration contracts."""
    radius = estimate_spectral_radius(g)
    if radius > 0 and cfg.epsilon >= cfg.num_classes / radius:
        raise ValueError(
            f"epsilon {cfg.epsilon:.4g} is too large for contraction: "
            f"need epsilon < c / spectral_radius = {cfg.num_classes / radius:.4g}"
        )


class ResidualBeliefs:
    """Per-node class beliefs expressed as deviations from uniform.

    Rows must sum to zero (they are residuals of probability vectors).
    """

    def __init__(self, values):
        vals = check_matrix(values, name="beliefs")
        if vals.shape[1] < 2:
            raise ValueError("beliefs need at least two class columns")
        worst = np.abs(vals.sum(axis=1)).max() if vals.size else 0.0
        if worst > _ROW_SUM_TOL:
            raise ValueError(f"belief rows must sum to zero (worst deviation {worst:.3e})")
        self.values = vals

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def num_classes(self):
        return self.values.shape[1]

    @classmethod
    def from_labels(cls, labels, num_classes):
        """Residuals of one-hot label encodings: 1 - 1/c at the observed
        class, -1/c elsewhere."""
        labels = np.asarray(labels, dtype=np.int64)
        vals = np.full((labels.size, num_classes), -1.0 / num_classes)
        vals[np.arange(labels.size), labels] += 1.0
        return cls(vals)

    def __repr__(self):
        return f"ResidualBeliefs(n={self.n}, classes={self.num_classes})"


def residual_priors_from_labels(g, labels, labeled, cfg):
    """Linearized prior residuals on the unlabeled nodes.

    Each unlabeled node receives ``epsilon / c`` times the summed residual
    one-hot beliefs of its labeled neighbors; rows therefore sum to zero.
    """
    labeled = check_node_index_set(labeled, g.n, "labeled")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (labeled.size,):
        raise ValueError("labels must align with the labeled index set")
    if labels.size and (labels.min() < 0 or labels.max() >= cfg.num_classes):
        raise ValueError(f"labels must lie in [0, {cfg.num_classes})")
    check_contraction(cfg, g)
    unlabeled = complement_index_set(labeled, g.n)
    onehot_residual = ResidualBeliefs.from_labels(labels, cfg.num_classes).values
    spread = g.adjacency[unlabeled][:, labeled] @ onehot_residual
    return ResidualBeliefs(cfg.epsilon / cfg.num_classes * spread)


def linbp_run(g, priors, cfg, order=1):
    """Iterate residual beliefs to their fixed point on the given graph.

    ``order=1`` is the standard linearized update; ``order=2`` keeps the
    quadratic message-correction terms, whose fixed point differs from the
    first-order one by O(epsilon^2) for fixed priors.
    """
    if priors.n != g.n or priors.num_classes != cfg.num_classes:
        raise ValueError("priors must match the graph size and class count")
    check_contraction(cfg, g)
    rate = cfg.epsilon / cfg.num_classes
    prior_vals = priors.values
    beliefs = prior_vals.copy()
    degrees = g.degrees[:, None]
    # order=2 coefficients from the second-order message fixed point.
    denom = 1.0 - (cfg.epsilon / cfg.num_classes) ** 2
    for it in range(1, cfg.budget.max_iterations + 1):
        if order == 1:
            new = prior_vals + rate * (g.adjacency @ beliefs)
        elif order == 2:
            neighbor_sum = (cfg.epsilon / denom) * (g.adjacency @ beliefs)
            self_term = (cfg.epsilon**2 / (cfg.num_classes * denom)) * degrees * beliefs
            new = prior_vals + (neighbor_sum - self_term) / cfg.num_classes
        else:
            raise ValueError("order must be 1 or 2")
        delta = np.linalg.norm(new - beliefs)
        scale = np.linalg.norm(new)
        beliefs = new
        if delta <= cfg.budget.rel_change_tolerance * max(scale, 1e-300):
            return ResidualBeliefs(beliefs)
    warnings.warn(
        f"belief propagation stopped after {cfg.budget.max_iterations} iterations "
        "above tolerance; returning the last iterate",
        ConvergenceWarning,
        stacklevel=2,
    )
    return ResidualBeliefs(beliefs)


def linbp_classify(beliefs):
    """Class with the largest residual belief per row; ties to the lowest index."""
    return np.argmax(beliefs.values, axis=1)


class LinearizedBeliefPropagation(BaseEstimator):
    """Classifier interface: priors from labeled neighbors, then belief
    iteration on the unlabeled subgraph.

    Conditioning on observed labels leaves a model on the unlabeled nodes
    whose topology is the induced subgraph, which is where the iteration
    runs; labeled nodes predict their observed class.
    """

    def __init__(self, graph, num_classes, epsilon=0.1, max_iterations=1000, tol=1e-9):
        self.graph = graph
        self.num_classes = num_classes
        self.epsilon = epsilon
        self.max_iterations = max_iterations
        self.tol = tol
        check_contraction(self._config(), graph)

    def _config(self):
        return LinBpConfig(
            num_classes=self.num_classes,
            epsilon=self.epsilon,
            budget=PropagationBudget(self.max_iterations, self.tol),
        )

    def fit(self, train_index, train_labels, features=None):
        cfg = self._config()
        train_index = check_node_index_set(train_index, self.graph.n, "train_index")
        labels = np.asarray(train_labels, dtype=np.int64)
        priors = residual_priors_from_labels(self.graph, labels, train_index, cfg)
        unlabeled = complement_index_set(train_index, self.graph.n)
        subgraph = self.graph.induced_subgraph(unlabeled)
        beliefs = linbp_run(subgraph, priors, cfg)
        predictions = np.empty(self.graph.n, dtype=np.int64)
        predictions[train_index] = labels
        predictions[unlabeled] = linbp_classify(beliefs)
        self.train_index_ = train_index
        self.beliefs_ = beliefs
        self.predictions_ = predictions
        return self

    def predict(self, index=None):
        if not hasattr(self, "predictions_"):
            raise RuntimeError("estimator is not fitted")
        if index is None:
            return self.predictions_.copy()
        return self.predictions_[check_node_index_set(index, self.graph.n, "index")]
