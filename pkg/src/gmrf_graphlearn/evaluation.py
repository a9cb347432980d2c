"""Metrics, data splits, cross-validation, and analytic accuracy estimation."""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import clone

from .gmrf import marginal_precision_dense, precision_dense
from .validation import check_node_index_set, check_vector, complement_index_set

# 13 log-spaced smoothing strengths spanning three decades.
OMEGA_GRID = np.logspace(-1.0, 2.0, 13)
K_GRID = (0, 1, 2, 3, 4)


def r_squared(pred, truth):
    """Coefficient of determination against the truth mean; may be negative."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size < 2:
        raise ValueError("pred and truth must be equal-length vectors of size >= 2")
    total = float(np.sum((truth - truth.mean()) ** 2))
    if total == 0.0:
        raise ValueError("truth has zero variance")
    return 1.0 - float(np.sum((truth - pred) ** 2)) / total


def f1_score(pred_classes, truth_classes, positive_class=1.0):
    """Harmonic mean of precision and recall for one class; 0 when there are
    neither predicted nor true positives."""
    pred = np.asarray(pred_classes)
    truth = np.asarray(truth_classes)
    if pred.shape != truth.shape:
        raise ValueError("predictions and truth must have equal length")
    tp = int(np.sum((pred == positive_class) & (truth == positive_class)))
    fp = int(np.sum((pred == positive_class) & (truth != positive_class)))
    fn = int(np.sum((pred != positive_class) & (truth == positive_class)))
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


@dataclass
class SplitSpec:
    """Labeled / unlabeled partition of the nodes with observed outcomes."""

    labeled: np.ndarray
    unlabeled: np.ndarray
    y_labeled: np.ndarray
    kind: str = "transductive"

    def __post_init__(self):
        if self.kind not in ("transductive", "inductive"):
            raise ValueError("split kind must be 'transductive' or 'inductive'")
        self.labeled = np.asarray(self.labeled, dtype=np.int64)
        self.unlabeled = np.asarray(self.unlabeled, dtype=np.int64)
        self.y_labeled = check_vector(self.y_labeled, self.labeled.size, "y_labeled")
        n = self.labeled.size + self.unlabeled.size
        check_node_index_set(self.labeled, n, "labeled")
        check_node_index_set(self.unlabeled, n, "unlabeled")
        if np.intersect1d(self.labeled, self.unlabeled).size:
            raise ValueError("labeled and unlabeled sets must be disjoint")

    @property
    def n(self):
        return self.labeled.size + self.unlabeled.size


def random_split(n, labeled_fraction, seed):
    """Random labeled/unlabeled index sets; deterministic given the seed."""
    if not 0.0 < labeled_fraction < 1.0:
        raise ValueError("labeled_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    num_labeled = max(1, int(round(labeled_fraction * n)))
    labeled = np.sort(rng.choice(n, size=num_labeled, replace=False))
    return labeled, complement_index_set(labeled, n)


def split_from_outcomes(outcomes, labeled):
    labeled = np.asarray(labeled, dtype=np.int64)
    n = outcomes.shape[0]
    return SplitSpec(labeled, complement_index_set(labeled, n), outcomes[labeled])


def expand_grid(grid):
    """Normalize a parameter grid to an ordered list of parameter dicts.

    A dict of lists expands to their product (keys in sorted order, values
    in the given order); a list of dicts passes through. Order matters:
    cross-validation ties resolve to the earliest entry, so grids should
    list weaker smoothing first.
    """
    if isinstance(grid, dict):
        keys = sorted(grid)
        combos = itertools.product(*(grid[k] for k in keys))
        return [dict(zip(keys, combo)) for combo in combos]
    out = [dict(point) for point in grid]
    if not out:
        raise ValueError("parameter grid must be nonempty")
    return out


@dataclass
class CvPlan:
    grid: object
    folds: int = 5
    seed: int = 0
    scoring: str = "r2"

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.scoring not in ("r2", "f1"):
            raise ValueError("scoring must be 'r2' or 'f1'")


@dataclass
class CvResult:
    best_params: dict
    best_index: int
    grid: list
    mean_scores: np.ndarray
    fold_scores: np.ndarray  # (grid, folds); NaN marks a skipped fold


def _fold_indices(num_train, folds, seed):
    order = np.random.default_rng(seed).permutation(num_train)
    return np.array_split(order, folds)


def cross_validate(estimator, plan, train_index, train_values, features=None):
    """Grid search by k-fold validation on the labeled nodes.

    Each fold's validation labels are withheld from the estimator entirely
    (it is refit on the remaining labeled nodes), so no label leaks into
    propagation. Returns the grid point with the best mean validation
    score; ties go to the earliest grid entry. Folds whose validation
    outcomes have zero variance are skipped with a warning; a grid point
    with every fold skipped is an error.
    """
    train_index = np.asarray(train_index, dtype=np.int64)
    train_values = check_vector(train_values, train_index.size, "train_values")
    grid = expand_grid(plan.grid)
    if train_index.size < plan.folds:
        raise ValueError("need at least as many labeled nodes as folds")
    parts = _fold_indices(train_index.size, plan.folds, plan.seed)
    fold_scores = np.full((len(grid), plan.folds), np.nan)
    for gi, params in enumerate(grid):
        model = clone(estimator).set_params(**params)
        for fi, val_part in enumerate(parts):
            mask = np.ones(train_index.size, dtype=bool)
            mask[val_part] = False
            fit_order = np.argsort(train_index[mask])
            fit_idx = train_index[mask][fit_order]
            fit_vals = train_values[mask][fit_order]
            val_idx = train_index[val_part]
            val_truth = train_values[val_part]
            model.fit(fit_idx, fit_vals, features)
            scores = model.predict()[val_idx]
            if plan.scoring == "r2":
                if np.allclose(val_truth, val_truth[0]):
                    warnings.warn(
                        f"fold {fi} skipped: validation outcomes have zero variance",
                        stacklevel=2,
                    )
                    continue
                fold_scores[gi, fi] = r_squared(scores, val_truth)
            else:
                from .estimators import classify_by_threshold, tune_threshold

                threshold = tune_threshold(scores, val_truth)
                fold_scores[gi, fi] = f1_score(
                    classify_by_threshold(scores, threshold), val_truth, positive_class=1.0
                )
        if np.all(np.isnan(fold_scores[gi])):
            raise ValueError("every cross-validation fold was skipped")
    mean_scores = np.nanmean(fold_scores, axis=1)
    best = int(np.argmax(mean_scores))
    return CvResult(
        best_params=grid[best],
        best_index=best,
        grid=grid,
        mean_scores=mean_scores,
        fold_scores=fold_scores,
    )


class AccuracyEstimator:
    """Analytic accuracy prediction from model parameters.

    Inverts the joint precision once per (params, graph) pair; each call to
    :meth:`estimate` evaluates the expected coefficient of determination of
    an algorithm from the trace of its conditional outcome covariance,
    relative to the marginal outcome variance around the unlabeled mean.
    """

    ALGORITHMS = ("lp", "lgc", "lgc_rp")

    def __init__(self, params, graph):
        self.params = params
        self.graph = graph
        gamma = precision_dense(params, graph)
        factor = scipy.linalg.cho_factor(gamma)
        sigma = scipy.linalg.cho_solve(factor, np.eye(gamma.shape[0]))
        self._sigma = (sigma + sigma.T) / 2.0
        self._n = graph.n
        self._p = params.p

    def _conditional_outcome_cov(self, unlabeled_idx, conditioning_idx):
        sigma = self._sigma
        if conditioning_idx.size == 0:
            return sigma[np.ix_(unlabeled_idx, unlabeled_idx)]
        ss = sigma[np.ix_(conditioning_idx, conditioning_idx)]
        cross = sigma[np.ix_(unlabeled_idx, conditioning_idx)]
        try:
            factor = scipy.linalg.cho_factor(ss)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("conditioning covariance block is singular") from exc
        return sigma[np.ix_(unlabeled_idx, unlabeled_idx)] - cross @ scipy.linalg.cho_solve(
            factor, cross.T
        )

    def estimate(self, labeled, algorithm):
        """Expected out-of-sample R^2 of ``lp``, ``lgc``, or ``lgc_rp``."""
        if algorithm not in self.ALGORITHMS:
            raise ValueError(f"algorithm must be one of {self.ALGORITHMS}")
        labeled = check_node_index_set(labeled, self._n, "labeled")
        unlabeled = complement_index_set(labeled, self._n)
        offset = self._p * self._n
        p_u = offset + unlabeled
        p_l = offset + labeled
        q = np.arange(offset)
        if algorithm == "lp":
            conditioning = p_l
        elif algorithm == "lgc":
            conditioning = q
        else:
            conditioning = np.concatenate([q, p_l])
        cond_cov = self._conditional_outcome_cov(p_u, conditioning)
        marginal = self._sigma[np.ix_(p_u, p_u)]
        ones = np.ones(unlabeled.size)
        denom = np.trace(marginal) - (ones @ marginal @ ones) / unlabeled.size
        return 1.0 - float(np.trace(cond_cov)) / float(denom)


def estimate_r2(params, graph, labeled, algorithm):
    """One-shot convenience wrapper over :class:`AccuracyEstimator`."""
    return AccuracyEstimator(params, graph).estimate(labeled, algorithm)


def marginalized_lp_oracle(params, graph, labeled, y_labeled):
    """Label propagation on the outcome precision left after integrating out
    the feature variables.

    The marginal precision is dense, so this is an oracle/demonstration
    path, not a practical algorithm. With no features it coincides with the
    dense form of constrained label propagation.
    """
    labeled = check_node_index_set(labeled, graph.n, "labeled")
    y_labeled = check_vector(y_labeled, labeled.size, "y_labeled")
    unlabeled = complement_index_set(labeled, graph.n)
    marginal = marginal_precision_dense(params, graph)
    block_uu = marginal[np.ix_(unlabeled, unlabeled)]
    block_ul = marginal[np.ix_(unlabeled, labeled)]
    return -scipy.linalg.solve(block_uu, block_ul @ y_labeled, assume_a="pos")


def lgc_filter_response(omega, lambdas):
    """Spectral gain ``1 / (1 + omega * lam)`` of the smoothing filter."""
    lams = _check_lambdas(lambdas)
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    return 1.0 / (1.0 + omega * lams)


def sgc_filter_response(n_layers, degree, lambdas):
    """Spectral gain ``(1 - d/(d+1) * lam)^K`` of repeated self-loop averaging.

    Exact only on d-regular graphs; elsewhere it is the usual regular-graph
    approximation.
    """
    lams = _check_lambdas(lambdas)
    if n_layers < 0:
        raise ValueError("n_layers must be nonnegative")
    if degree < 1:
        raise ValueError("degree must be at least 1")
    return (1.0 - degree / (degree + 1.0) * lams) ** n_layers


def _check_lambdas(lambdas):
    lams = np.asarray(lambdas, dtype=float)
    if np.any(lams < 0.0) or np.any(lams > 2.0):
        raise ValueError("eigenvalues must lie in [0, 2]")
    return lams
