import itertools

import numpy as np
import pytest
from sklearn.base import clone

from gmrf_graphlearn.estimators import (
    FeatureSmoother,
    LabelPropagation,
    LinearGraphConvolution,
    ResidualPropagation,
    SimpleGraphConvolution,
    ThresholdClassifier,
    classify_by_threshold,
    make_lgc_rp,
    ols,
    tune_threshold,
)
from gmrf_graphlearn.evaluation import f1_score, r_squared, random_split
from gmrf_graphlearn.gmrf import precision_dense, sample, synthetic_params
from gmrf_graphlearn.graph import (
    apply_selfloop_adjacency,
    graph_from_edges,
    normalized_laplacian_dense,
    watts_strogatz,
)
from gmrf_graphlearn.linalg import dense_conditional_gaussian
from gmrf_graphlearn.validation import complement_index_set

TIGHT = dict(max_iterations=200000, tol=1e-13)


def path_graph(n):
    return graph_from_edges(n, range(n - 1), range(1, n))


class TestOls:
    def test_identity_design(self):
        t = np.array([2.0, -1.0, 0.5])
        np.testing.assert_allclose(ols(np.eye(3), t), t)

    def test_duplicated_column_splits_weight(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(20)
        features = np.column_stack([x, x])
        targets = 3.0 * x
        coef = ols(features, targets)
        expected = np.linalg.pinv(features) @ targets
        np.testing.assert_allclose(coef, expected, atol=1e-10)
        np.testing.assert_allclose(coef, [1.5, 1.5], atol=1e-10)

    def test_exact_linear_data_has_zero_residuals(self):
        rng = np.random.default_rng(1)
        features = rng.standard_normal((15, 3))
        beta = np.array([1.0, -2.0, 0.3])
        coef = ols(features, features @ beta)
        np.testing.assert_allclose(features @ coef, features @ beta, atol=1e-10)


class TestLabelPropagationEstimator:
    def test_predictions_pin_labels(self):
        g = watts_strogatz(20, 4, 0.2, seed=0)
        rng = np.random.default_rng(2)
        labeled = np.sort(rng.choice(20, size=6, replace=False))
        y = rng.standard_normal(6)
        model = LabelPropagation(g, omega=2.0, **TIGHT).fit(labeled, y)
        np.testing.assert_allclose(model.predict(labeled), y)

    def test_executors_agree(self):
        g = watts_strogatz(30, 4, 0.2, seed=1)
        rng = np.random.default_rng(3)
        labeled = np.sort(rng.choice(30, size=9, replace=False))
        y = rng.standard_normal(9)
        a = LabelPropagation(g, omega=3.0, **TIGHT).fit(labeled, y).predict()
        b = LabelPropagation(g, omega=3.0, executor="cg", **TIGHT).fit(labeled, y).predict()
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_sklearn_clone_round_trip(self):
        g = path_graph(4)
        model = LabelPropagation(g, omega=1.5)
        cloned = clone(model)
        assert cloned.get_params()["omega"] == 1.5
        cloned.set_params(omega=2.5)
        assert model.omega == 1.5 and cloned.omega == 2.5


class TestFeatureSmoother:
    def test_transform_matches_kernel(self):
        from gmrf_graphlearn.smoothing import PropagationBudget, SmoothingParam, smooth_features

        g = watts_strogatz(15, 4, 0.2, seed=2)
        x = np.random.default_rng(4).standard_normal((15, 2))
        out = FeatureSmoother(g, omega=1.2, **TIGHT).fit(x).transform(x)
        expected = smooth_features(
            g, x, SmoothingParam(1.2), PropagationBudget(200000, 1e-13)
        )
        np.testing.assert_allclose(out, expected)

    def test_fit_transform(self):
        g = path_graph(3)
        x = np.eye(3)[:, :2]
        out = FeatureSmoother(g, omega=0.0).fit_transform(x)
        np.testing.assert_array_equal(out, x)


class TestLinearGraphConvolution:
    def test_zero_smoothing_equals_plain_regression(self):
        g = watts_strogatz(25, 4, 0.2, seed=3)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((25, 3))
        y = x @ np.array([1.0, 0.5, -0.2]) + 0.1 * rng.standard_normal(25)
        labeled = np.sort(rng.choice(25, size=10, replace=False))
        lgc = LinearGraphConvolution(g, omega=0.0).fit(labeled, y[labeled], x)
        coef = ols(x[labeled], y[labeled])
        np.testing.assert_allclose(lgc.coef_, coef, atol=1e-12)
        np.testing.assert_allclose(lgc.predict(), x @ coef, atol=1e-12)

    def test_edgeless_graph_equals_plain_regression(self):
        import scipy.sparse as sp

        from gmrf_graphlearn.graph import Graph

        g = Graph(sp.csr_matrix((12, 12)))
        rng = np.random.default_rng(6)
        x = rng.standard_normal((12, 2))
        y = rng.standard_normal(12)
        labeled = np.arange(6)
        lgc = LinearGraphConvolution(g, omega=2.0, **TIGHT).fit(labeled, y[labeled], x)
        plain = ols(x[labeled], y[labeled])
        np.testing.assert_allclose(lgc.predict(), x @ plain, atol=1e-8)

    def test_smoothing_beats_plain_regression_on_model_data(self):
        g = watts_strogatz(400, 6, 0.01, seed=4)
        params = synthetic_params(2, 10.0, seed=7)
        a = sample(params, g, seed=8, method="spectral")
        x, y = a.features, a.outcome
        labeled, unlabeled = random_split(400, 0.3, seed=9)
        lgc = LinearGraphConvolution(g, omega=params.omega, executor="cg").fit(
            labeled, y[labeled], x
        )
        lr = LinearGraphConvolution(g, omega=0.0).fit(labeled, y[labeled], x)
        r2_lgc = r_squared(lgc.predict(unlabeled), y[unlabeled])
        r2_lr = r_squared(lr.predict(unlabeled), y[unlabeled])
        assert r2_lgc > r2_lr

    def test_supplied_coefficients_bypass_fitting(self):
        g = path_graph(5)
        x = np.random.default_rng(10).standard_normal((5, 2))
        beta = np.array([0.3, -1.1])
        model = LinearGraphConvolution(g, omega=0.0, beta=beta).fit([0], [99.0], x)
        np.testing.assert_array_equal(model.coef_, beta)

    def test_smoothing_cache_respects_omega_change(self):
        g = watts_strogatz(20, 4, 0.2, seed=5)
        rng = np.random.default_rng(11)
        x = rng.standard_normal((20, 2))
        y = rng.standard_normal(20)
        labeled = np.arange(8)
        model = LinearGraphConvolution(g, omega=0.5, **TIGHT)
        first = model.fit(labeled, y[labeled], x).predict()
        again = model.fit(labeled, y[labeled], x).predict()
        np.testing.assert_array_equal(first, again)
        model.set_params(omega=5.0)
        changed = model.fit(labeled, y[labeled], x).predict()
        assert not np.allclose(first, changed)

    def test_inductive_prediction_uses_other_graph(self):
        g1 = watts_strogatz(30, 4, 0.1, seed=6)
        g2 = watts_strogatz(30, 4, 0.1, seed=7)
        rng = np.random.default_rng(12)
        x1 = rng.standard_normal((30, 2))
        x2 = rng.standard_normal((30, 2))
        y1 = x1 @ np.array([1.0, -0.5])
        model = LinearGraphConvolution(g1, omega=1.0, **TIGHT).fit(np.arange(15), y1[:15], x1)
        preds = model.predict_on(g2, x2)
        assert preds.shape == (30,)
        from gmrf_graphlearn.smoothing import PropagationBudget, SmoothingParam, smooth_features

        smoothed = smooth_features(g2, x2, SmoothingParam(1.0), PropagationBudget(200000, 1e-13))
        np.testing.assert_allclose(preds, smoothed @ model.coef_, atol=1e-10)

    def test_requires_features(self):
        g = path_graph(3)
        with pytest.raises(ValueError, match="feature matrix"):
            LinearGraphConvolution(g).fit([0], [1.0])


class TestSimpleGraphConvolution:
    def test_zero_layers_is_plain_regression(self):
        g = watts_strogatz(20, 4, 0.2, seed=8)
        rng = np.random.default_rng(13)
        x = rng.standard_normal((20, 2))
        y = rng.standard_normal(20)
        labeled = np.arange(10)
        sgc = SimpleGraphConvolution(g, n_layers=0).fit(labeled, y[labeled], x)
        np.testing.assert_allclose(sgc.coef_, ols(x[labeled], y[labeled]), atol=1e-12)

    def test_two_node_path_averages_columns(self):
        g = path_graph(2)
        x = np.array([[4.0, 0.0], [0.0, 2.0]])
        for layers in (1, 2, 3):
            conv = x.copy()
            for _ in range(layers):
                conv = apply_selfloop_adjacency(g, conv)
            np.testing.assert_allclose(conv, np.tile(x.mean(axis=0), (2, 1)), atol=1e-12)

    def test_large_depth_converges_to_dominant_eigenvector(self):
        g = watts_strogatz(30, 4, 0.2, seed=9)
        rng = np.random.default_rng(14)
        x = rng.standard_normal((30, 3))
        # power-iteration oracle for the dominant eigenvector
        v = np.ones(30)
        for _ in range(500):
            v = apply_selfloop_adjacency(g, v)
            v /= np.linalg.norm(v)
        conv = x.copy()
        for _ in range(400):
            conv = apply_selfloop_adjacency(g, conv)
        for j in range(3):
            col = conv[:, j] / np.linalg.norm(conv[:, j])
            assert abs(col @ v) > 1.0 - 1e-8

    def test_negative_layers_rejected(self):
        g = path_graph(3)
        with pytest.raises(ValueError):
            SimpleGraphConvolution(g, n_layers=-1).fit([0], [1.0], np.ones((3, 1)))


class TestResidualPropagation:
    def test_zero_residuals_return_base_prediction(self):
        g = watts_strogatz(20, 4, 0.2, seed=10)
        rng = np.random.default_rng(15)
        x = rng.standard_normal((20, 2))
        beta = np.array([1.0, -0.7])
        y = x @ beta  # base with true coefficients fits exactly
        labeled = np.arange(8)
        base = LinearGraphConvolution(g, omega=0.0)
        model = ResidualPropagation(g, base=base, omega=2.0, **TIGHT)
        model.fit(labeled, y[labeled], x)
        np.testing.assert_allclose(model.predict(), model.base_.predict(), atol=1e-9)

    def test_none_base_reduces_to_label_propagation(self):
        g = watts_strogatz(25, 4, 0.2, seed=11)
        rng = np.random.default_rng(16)
        labeled = np.sort(rng.choice(25, size=8, replace=False))
        y = rng.standard_normal(8)
        rp = ResidualPropagation(g, base=None, omega=1.5, **TIGHT).fit(labeled, y)
        lp = LabelPropagation(g, omega=1.5, **TIGHT).fit(labeled, y)
        np.testing.assert_allclose(rp.predict(), lp.predict(), atol=1e-12)

    def test_labeled_predictions_recover_observations(self):
        g = watts_strogatz(20, 4, 0.2, seed=12)
        rng = np.random.default_rng(17)
        x = rng.standard_normal((20, 2))
        y = rng.standard_normal(20)
        labeled = np.arange(0, 20, 3)
        model = make_lgc_rp(g, omega=1.0, **TIGHT).fit(labeled, y[labeled], x)
        np.testing.assert_allclose(model.predict(labeled), y[labeled], atol=1e-9)

    def test_nested_params_reachable_through_grid(self):
        g = path_graph(4)
        model = make_lgc_rp(g, omega=1.0)
        model.set_params(omega=2.0, base__omega=2.0)
        assert model.omega == 2.0 and model.base.omega == 2.0


class TestLgcRpOracle:
    def test_matches_joint_conditional_mean(self):
        # With model coefficients supplied, the two-stage predictor must equal
        # the conditional mean of unknown outcomes given features and observed
        # outcomes under the joint Gaussian (dense oracle).
        for seed in range(3):
            g = watts_strogatz(30, 4, 0.2, seed=20 + seed)
            params = synthetic_params(2, 2.0, seed=30 + seed)
            a = sample(params, g, seed=40 + seed)
            x, y = a.features, a.outcome
            labeled, unlabeled = random_split(30, 0.4, seed=50 + seed)
            model = make_lgc_rp(g, omega=params.omega, executor="cg", **TIGHT)
            model.set_params(base__beta=params.beta)
            pred = model.fit(labeled, y[labeled], x).predict(unlabeled)

            gamma = precision_dense(params, g)
            vec = a.values.reshape(-1, order="F")
            observed = np.sort(np.concatenate([np.arange(60), 60 + labeled]))
            cond_mean, _ = dense_conditional_gaussian(
                np.zeros(90), gamma, observed, vec[observed]
            )
            np.testing.assert_allclose(pred, cond_mean, atol=1e-8)

    def test_three_step_equals_linear_form(self):
        # One-shot linear-form oracle evaluated densely.
        for seed in range(3):
            g = watts_strogatz(25, 4, 0.3, seed=60 + seed)
            rng = np.random.default_rng(70 + seed)
            x = rng.standard_normal((25, 3))
            y = rng.standard_normal(25)
            labeled, unlabeled = random_split(25, 0.4, seed=80 + seed)
            omega = float(rng.uniform(0.2, 5.0))
            model = make_lgc_rp(g, omega=omega, executor="cg", **TIGHT)
            pred = model.fit(labeled, y[labeled], x).predict(unlabeled)

            n_mat = normalized_laplacian_dense(g)
            m = np.eye(25) + omega * n_mat
            smoothed = np.linalg.solve(m, x)
            beta = model.base_.coef_
            base = smoothed @ beta
            resid = y[labeled] - base[labeled]
            correction = -np.linalg.solve(
                m[np.ix_(unlabeled, unlabeled)], m[np.ix_(unlabeled, labeled)] @ resid
            )
            np.testing.assert_allclose(pred, base[unlabeled] + correction, atol=1e-10)


class TestThresholding:
    def test_classify(self):
        out = classify_by_threshold([0.2, 0.5, 0.9], 0.5)
        np.testing.assert_array_equal(out, [0.0, 1.0, 1.0])

    def test_perfectly_separated_scores(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        labels = np.array([0.0, 0.0, 1.0, 1.0])
        threshold = tune_threshold(scores, labels)
        assert 0.2 < threshold < 0.8
        assert f1_score(classify_by_threshold(scores, threshold), labels) == 1.0

    def test_all_positive_labels(self):
        scores = np.array([0.3, 0.6, 0.9])
        labels = np.ones(3)
        threshold = tune_threshold(scores, labels)
        assert threshold <= scores.min()
        assert f1_score(classify_by_threshold(scores, threshold), labels) == 1.0

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(18)
        scores = rng.random(4)
        labels = np.array([1.0, 0.0, 1.0, 0.0])
        threshold = tune_threshold(scores, labels)
        best = max(
            np.concatenate([scores, (np.sort(scores)[:-1] + np.sort(scores)[1:]) / 2, [0.0, 2.0]]),
            key=lambda t: (f1_score(classify_by_threshold(scores, t), labels), -t),
        )
        achieved = f1_score(classify_by_threshold(scores, threshold), labels)
        optimal = f1_score(classify_by_threshold(scores, best), labels)
        assert achieved == pytest.approx(optimal)

    def test_ties_break_to_smaller_threshold(self):
        scores = np.array([0.0, 1.0])
        labels = np.array([1.0, 1.0])
        assert tune_threshold(scores, labels) == 0.0

    def test_empty_validation_rejected(self):
        with pytest.raises(ValueError):
            tune_threshold([], [])

    def test_threshold_classifier(self):
        g = watts_strogatz(20, 4, 0.1, seed=13)
        rng = np.random.default_rng(19)
        x = rng.standard_normal((20, 2))
        labels = (x[:, 0] > 0).astype(float)
        labeled = np.arange(12)
        clf = ThresholdClassifier(LinearGraphConvolution(g, omega=0.0), threshold=0.5)
        clf.fit(labeled, labels[labeled], x)
        preds = clf.predict()
        assert set(np.unique(preds)) <= {0.0, 1.0}
        with pytest.raises(ValueError, match="0.0 / 1.0"):
            clf.fit(labeled, labels[labeled] + 0.5, x)
