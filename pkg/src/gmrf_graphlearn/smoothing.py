"""Fixed-point propagation kernels shared by the predictors.

All kernels diffuse values along the normalized adjacency with a mixing
weight ``alpha = omega / (1 + omega)``; their fixed points coincide with
direct solves against ``I + omega * N`` (available through the "cg"
executor).
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.exceptions import ConvergenceWarning

from . import linalg
from .graph import apply_normalized_adjacency
from .validation import check_node_index_set, check_vector, complement_index_set


def omega_to_alpha(omega):
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return omega / (1.0 + omega)


def alpha_to_omega(alpha):
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    return alpha / (1.0 - alpha)


@dataclass(frozen=True)
class SmoothingParam:
    """Smoothing strength; ``omega`` and ``alpha`` are two views of it."""

    omega: float

    def __post_init__(self):
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValueError("omega must be finite and nonnegative")

    @property
    def alpha(self):
        return omega_to_alpha(self.omega)

    @classmethod
    def from_alpha(cls, alpha):
        return cls(alpha_to_omega(alpha))


@dataclass(frozen=True)
class PropagationBudget:
    max_iterations: int = 1000
    rel_change_tolerance: float = 1e-9

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.rel_change_tolerance <= 0:
            raise ValueError("rel_change_tolerance must be positive")


def _as_smoothing(s):
    if isinstance(s, SmoothingParam):
        return s
    return SmoothingParam(float(s))


def _rel_change(new, old):
    delta = np.linalg.norm(new - old)
    scale = np.linalg.norm(new)
    if scale == 0.0:
        return 0.0 if delta == 0.0 else np.inf
    return delta / scale


def _warn_budget(budget, change, what):
    warnings.warn(
        f"{what} stopped after {budget.max_iterations} iterations with relative "
        f"change {change:.3e} above tolerance {budget.rel_change_tolerance:.1e}; "
        "returning the last iterate",
        ConvergenceWarning,
        stacklevel=3,
    )


def _constrained_fixed_point(g, pinned_values, pinned, alpha, budget):
    """Diffuse from zero on the free nodes with the pinned block held fixed.

    Returns ``(full_values, n_iter, converged)``; the free-node update is
    ``alpha * (S f)`` restricted to the free block.
    """
    free = complement_index_set(pinned, g.n)
    full = np.zeros(g.n if np.ndim(pinned_values) == 1 else (g.n, pinned_values.shape[1]))
    full[pinned] = pinned_values
    if free.size == 0 or alpha == 0.0:
        return full, 0, True, 0.0
    change = np.inf
    for it in range(1, budget.max_iterations + 1):
        new_free = alpha * apply_normalized_adjacency(g, full)[free]
        change = _rel_change(new_free, full[free])
        full[free] = new_free
        if change <= budget.rel_change_tolerance:
            return full, it, True, change
    return full, budget.max_iterations, False, change


def _constrained_solve_cg(g, pinned_values, pinned, omega, budget):
    """Direct solve of the pinned-block system via conjugate gradients."""
    free = complement_index_set(pinned, g.n)
    vals = np.atleast_2d(np.asarray(pinned_values, dtype=float).T).T  # (n_L, k)
    cols = vals.shape[1]
    full = np.zeros((g.n, cols))
    full[pinned] = vals
    if free.size and omega > 0.0:
        rhs_full = omega * apply_normalized_adjacency(g, full)

        def action(v):
            padded = np.zeros(g.n)
            padded[free] = v
            return (1.0 + omega) * v - omega * apply_normalized_adjacency(g, padded)[free]

        op = linalg.LinearOperator(free.size, action)
        cfg = linalg.CgConfig(rel_tolerance=budget.rel_change_tolerance)
        for j in range(cols):
            full[free, j] = linalg.conjugate_gradient(op, rhs_full[free, j], cfg)
    if np.ndim(pinned_values) == 1:
        return full[:, 0]
    return full


def label_propagation(g, y_labeled, labeled, s, budget=None, executor="iteration"):
    """Predicted outcomes on the unlabeled nodes given pinned observations.

    Iterates the constrained diffusion from zero initial beliefs until the
    relative change of the unlabeled block drops below tolerance; with
    ``executor="cg"`` the equivalent linear system is solved directly.
    Warns (and returns the last iterate) if the budget runs out.
    """
    s = _as_smoothing(s)
    budget = budget or PropagationBudget()
    labeled = check_node_index_set(labeled, g.n, "labeled")
    if labeled.size == 0:
        raise ValueError("at least one labeled node is required")
    y_labeled = check_vector(y_labeled, labeled.size, "y_labeled")
    free = complement_index_set(labeled, g.n)
    if executor == "cg":
        full = _constrained_solve_cg(g, y_labeled, labeled, s.omega, budget)
        return full[free]
    full, _, converged, change = _constrained_fixed_point(g, y_labeled, labeled, s.alpha, budget)
    if not converged:
        _warn_budget(budget, change, "label propagation")
    return full[free]


def label_propagation_unconstrained(g, initial, alpha, budget=None):
    """Diffusion that keeps pulling every node back toward its initial belief.

    Converges to ``(1 - alpha) (I - alpha S)^{-1} initial``; multi-column
    input propagates each column independently.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    budget = budget or PropagationBudget()
    values = np.asarray(initial, dtype=float)
    if values.shape[0] != g.n:
        raise ValueError(f"initial beliefs must have {g.n} rows")
    if alpha == 0.0:
        return values.copy()
    current = values.copy()
    for _ in range(budget.max_iterations):
        new = (1.0 - alpha) * values + alpha * apply_normalized_adjacency(g, current)
        change = _rel_change(new, current)
        current = new
        if change <= budget.rel_change_tolerance:
            return current
    _warn_budget(budget, change, "unconstrained propagation")
    return current


def smooth_features(g, features, s, budget=None, executor="iteration"):
    """Graph-smoothed copy of a feature matrix.

    Fixed point of per-column diffusion toward neighbors while anchored to
    the raw values; equals the direct solve of ``(I + omega N) smoothed =
    features`` which the "cg" executor performs.
    """
    s = _as_smoothing(s)
    budget = budget or PropagationBudget()
    values = np.asarray(features, dtype=float)
    if values.shape[0] != g.n:
        raise ValueError(f"features must have {g.n} rows")
    if s.omega == 0.0:
        return values.copy()
    if executor == "cg":
        flat = values.ndim == 1
        cols = values[:, None] if flat else values
        out = np.empty_like(cols)

        def action(v):
            return (1.0 + s.omega) * v - s.omega * apply_normalized_adjacency(g, v)

        op = linalg.LinearOperator(g.n, action)
        cfg = linalg.CgConfig(rel_tolerance=budget.rel_change_tolerance)
        for j in range(cols.shape[1]):
            out[:, j] = linalg.conjugate_gradient(op, cols[:, j], cfg)
        return out[:, 0] if flat else out
    return label_propagation_unconstrained(g, values, s.alpha, budget)


def residual_propagation(g, base_predictions, y_labeled, labeled, s, budget=None, executor="iteration"):
    """Propagate labeled-node residuals and add them to a base prediction.

    Returns corrected predictions on the unlabeled nodes: the residuals of
    the base predictor on the labeled nodes are diffused with the same
    constrained scheme as label propagation, then added back.
    """
    labeled = check_node_index_set(labeled, g.n, "labeled")
    base = check_vector(base_predictions, g.n, "base_predictions")
    y_labeled = check_vector(y_labeled, labeled.size, "y_labeled")
    residuals = y_labeled - base[labeled]
    free = complement_index_set(labeled, g.n)
    propagated = label_propagation(g, residuals, labeled, s, budget, executor)
    return base[free] + propagated


def label_propagation_multiclass(g, labels, labeled, n_classes, s, budget=None, executor="iteration"):
    """Class predictions on unlabeled nodes via per-class propagation.

    One-hot encodes the observed labels, propagates each class column
    independently with the constrained scheme, and takes the argmax
    (ties resolved toward the lowest class index).
    """
    labeled = check_node_index_set(labeled, g.n, "labeled")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (labeled.size,):
        raise ValueError("labels must align with the labeled index set")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    s = _as_smoothing(s)
    budget = budget or PropagationBudget()
    onehot = np.zeros((labeled.size, n_classes))
    onehot[np.arange(labeled.size), labels] = 1.0
    if executor == "cg":
        full = _constrained_solve_cg(g, onehot, labeled, s.omega, budget)
    else:
        full, _, converged, change = _constrained_fixed_point(g, onehot, labeled, s.alpha, budget)
        if not converged:
            _warn_budget(budget, change, "multiclass label propagation")
    free = complement_index_set(labeled, g.n)
    return np.argmax(full[free], axis=1)
