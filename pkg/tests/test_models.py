import json
import sys
from pathlib import Path

import numpy as np
import pytest

from smx import models
from smx.dataio import SpectralDataset
from smx.errors import ConfigError, ModelError
from smx.models import (
    ExternalModel,
    LogisticModel,
    RidgeModel,
    fit_logistic,
    fit_ridge,
    load_model,
    save_model,
)

STUB = str(Path(__file__).parent / "helpers" / "external_model.py")


def _dataset(X, y):
    X = np.asarray(X, dtype=float)
    return SpectralDataset(
        axis=np.arange(1.0, X.shape[1] + 1.0),
        intensities=X,
        labels=y,
        sample_ids=[f"s{i}" for i in range(X.shape[0])],
    )


class TestRidge:
    def test_zero_weights_predict_intercept(self):
        model = RidgeModel(weights=np.zeros(3), intercept=0.7)
        np.testing.assert_array_equal(model.predict(np.ones((4, 3))), np.full(4, 0.7))

    def test_separable_two_points_lambda_zero(self):
        ds = _dataset([[0.0], [1.0]], [0, 1])
        model = fit_ridge(ds, lam=0.0)
        np.testing.assert_allclose(model.predict(ds.intensities), [0.0, 1.0], atol=1e-9)

    def test_large_lambda_shrinks_to_label_mean(self):
        ds = _dataset([[0.0, 1.0], [1.0, 0.0], [2.0, 5.0], [3.0, 2.0]], [0, 0, 1, 1])
        model = fit_ridge(ds, lam=1e12)
        np.testing.assert_allclose(model.predict(ds.intensities), np.full(4, 0.5), atol=1e-6)
        assert np.max(np.abs(model.weights)) < 1e-9

    def test_duplicate_features_regularized_solution(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        ds = _dataset(X, [0, 0, 1, 1])
        model = fit_ridge(ds, lam=1.0)
        # independent closed form: w = (Xc'Xc + I)^-1 Xc'yc
        Xc = X - X.mean(axis=0)
        yc = np.array([0.0, 0.0, 1.0, 1.0]) - 0.5
        expected = np.linalg.inv(Xc.T @ Xc + np.eye(2)) @ Xc.T @ yc
        np.testing.assert_allclose(model.weights, expected, atol=1e-12)
        assert np.all(np.isfinite(model.predict(X)))

    def test_duplicate_features_lambda_zero_rejected(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(ModelError, match="lambda"):
            fit_ridge(_dataset(X, [0, 0, 1, 1]), lam=0.0)

    def test_training_predictions_match_refit_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(20, 6))
        y = (X[:, 0] > 0).astype(int)
        ds = _dataset(X, y)
        model = fit_ridge(ds, lam=0.5)
        np.testing.assert_allclose(model.predict(X), model.fitted_values, atol=1e-9)
        refit = fit_ridge(ds, lam=0.5)
        np.testing.assert_allclose(refit.predict(X), model.fitted_values, atol=1e-9)

    def test_empty_matrix_gives_empty_output(self):
        model = RidgeModel(weights=np.ones(3), intercept=0.0)
        assert model.predict(np.zeros((0, 3))).shape == (0,)

    def test_width_mismatch(self):
        model = RidgeModel(weights=np.ones(3), intercept=0.0)
        with pytest.raises(ModelError, match="width"):
            model.predict(np.zeros((2, 4)))

    def test_single_class_rejected(self):
        with pytest.raises(ConfigError, match="both classes"):
            fit_ridge(_dataset([[0.0], [1.0]], [0, 0]))


class TestLogistic:
    def test_zero_model_is_uniform(self):
        model = LogisticModel(weights=np.zeros(4), intercept=0.0)
        np.testing.assert_array_equal(
            model.predict_proba(np.ones((3, 4))), np.full((3, 2), 0.5)
        )

    def test_matches_sigmoid_oracle(self):
        rng = np.random.default_rng(2)
        w = rng.normal(size=5)
        model = LogisticModel(weights=w, intercept=0.3)
        X = rng.normal(size=(10, 5))
        z = X @ w + 0.3
        oracle = 1.0 / (1.0 + np.exp(-z))
        np.testing.assert_allclose(model.predict_proba(X)[:, 1], oracle, atol=1e-9)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        model = LogisticModel(weights=rng.normal(size=4) * 20, intercept=-2.0)
        proba = model.predict_proba(rng.normal(size=(50, 4)))
        np.testing.assert_allclose(proba.sum(axis=1), np.ones(50), atol=1e-9)
        assert np.all(proba >= 0) and np.all(proba <= 1)

    def test_separable_1d_reaches_full_accuracy(self):
        X = np.array([[v] for v in (-3.0, -2.5, -2.0, -1.5, -1.0, 1.0, 1.5, 2.0, 2.5, 3.0)])
        y = (X[:, 0] > 0).astype(int)
        model = fit_logistic(_dataset(X, y), l2=1e-3)
        pred = (model.predict_proba(X)[:, 1] > 0.5).astype(int)
        assert np.array_equal(pred, y)

    def test_huge_l2_returns_class_prior(self):
        X = np.random.default_rng(4).normal(size=(20, 3))
        y = np.array([0] * 5 + [1] * 15)
        model = fit_logistic(_dataset(X, y), l2=1e9, max_iters=5000)
        proba = model.predict_proba(X)[:, 1]
        np.testing.assert_allclose(proba, np.full(20, 0.75), atol=1e-3)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 4))
        y = rng.integers(0, 2, 12).astype(float)
        w = rng.normal(size=4) * 0.5
        l2 = 0.1

        def loss(wv):
            z = X @ wv
            return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (wv @ wv))

        analytic = X.T @ (1.0 / (1.0 + np.exp(-(X @ w))) - y) / 12 + l2 * w
        step = 1e-6
        for k in range(4):
            e = np.zeros(4)
            e[k] = step
            numeric = (loss(w + e) - loss(w - e)) / (2 * step)
            assert abs(numeric - analytic[k]) / max(abs(analytic[k]), 1e-8) < 1e-4

    def test_deterministic_fit(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(15, 3))
        y = (X[:, 0] > 0).astype(int)
        a = fit_logistic(_dataset(X, y))
        b = fit_logistic(_dataset(X, y))
        assert np.array_equal(a.weights, b.weights) and a.intercept == b.intercept


class TestPersistence:
    def test_ridge_round_trip(self, tmp_path):
        model = RidgeModel(weights=np.array([1.5, -2.0]), intercept=0.25, lam=0.7)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, RidgeModel)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        assert loaded.intercept == model.intercept and loaded.lam == model.lam

    def test_logistic_round_trip(self, tmp_path):
        model = LogisticModel(weights=np.array([0.5]), intercept=-1.0, l2=0.01)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert isinstance(loaded, LogisticModel)
        np.testing.assert_array_equal(loaded.weights, model.weights)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"kind": "mystery"}))
        with pytest.raises(ConfigError, match="unknown model kind"):
            load_model(path)

    def test_incomplete_spec_rejected(self):
        with pytest.raises(ConfigError, match="ridge"):
            load_model({"kind": "ridge"})


class TestExternal:
    def test_fixed_probabilities_parse_exactly(self):
        with ExternalModel([sys.executable, STUB, "fixed-proba", "3", "0.7", "0.3"]) as model:
            assert model.kind == "probabilistic" and model.n_features == 3
            proba = model.predict_proba(np.zeros((4, 3)))
            np.testing.assert_array_equal(proba, np.tile([0.7, 0.3], (4, 1)))

    def test_unnormalized_probabilities_rejected(self):
        with ExternalModel([sys.executable, STUB, "fixed-proba", "2", "0.7", "0.7"]) as model:
            with pytest.raises(ModelError, match="sum to 1"):
                model.predict_proba(np.zeros((2, 2)))

    def test_continuous_row_sums(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(6, 5))
        with ExternalModel([sys.executable, STUB, "sum", "5"]) as model:
            np.testing.assert_allclose(model.predict(X), X.sum(axis=1), atol=1e-12)

    def test_repeat_calls_value_identical(self):
        X = np.random.default_rng(8).normal(size=(3, 2))
        with ExternalModel([sys.executable, STUB, "sum", "2"]) as model:
            np.testing.assert_array_equal(model.predict(X), model.predict(X))

    def test_error_reply_surfaces_message(self):
        with ExternalModel([sys.executable, STUB, "error", "2"]) as model:
            with pytest.raises(ModelError, match="synthetic failure"):
                model.predict(np.zeros((1, 2)))

    def test_process_death_reports_exit(self):
        with ExternalModel([sys.executable, STUB, "die", "2"]) as model:
            with pytest.raises(ModelError, match="exit code|closed its stream"):
                model.predict(np.zeros((1, 2)))

    def test_kind_mismatch_rejected(self):
        with ExternalModel([sys.executable, STUB, "sum", "2"]) as model:
            with pytest.raises(ModelError, match="predict_proba"):
                model.predict_proba(np.zeros((1, 2)))

    def test_width_mismatch_rejected(self):
        with ExternalModel([sys.executable, STUB, "sum", "2"]) as model:
            with pytest.raises(ModelError, match="width"):
                model.predict(np.zeros((1, 3)))

    def test_chunked_requests_match_single_request(self, monkeypatch):
        X = np.random.default_rng(9).normal(size=(32, 4))
        with ExternalModel([sys.executable, STUB, "sum", "4"]) as model:
            whole = model.predict(X)
            monkeypatch.setattr(models, "_MAX_REQUEST_BYTES", 256)
            chunked = model.predict(X)
        np.testing.assert_array_equal(whole, chunked)

    def test_load_model_external_spec(self):
        spec = {"kind": "external", "argv": [sys.executable, STUB, "sum", "2"]}
        model = load_model(spec)
        try:
            assert model.kind == "continuous"
        finally:
            model.close()
