"""Tests for standardization, the RBF kernel, and the SMO-trained
soft-margin classifier."""

import numpy as np
import pytest

from spharmshape.errors import DegenerateData, LengthMismatch, SchemaMismatch
from spharmshape.svm import (
    Scaler,
    SvmModel,
    apply_scaler,
    decision_function,
    predict,
    rbf_kernel,
    standardize,
    train_svm,
)


def separable_blobs(rng, n_per_class=8):
    X = np.vstack([
        rng.normal(loc=(-2.5, 0.0), scale=0.4, size=(n_per_class, 2)),
        rng.normal(loc=(2.5, 0.0), scale=0.4, size=(n_per_class, 2)),
    ])
    y = np.array([-1] * n_per_class + [1] * n_per_class)
    return X, y


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1, 1, -1, -1])


class TestStandardize:
    def test_zero_mean_unit_std(self, rng):
        X = rng.normal(loc=3.0, scale=2.0, size=(20, 4))
        Xs, scaler = standardize(X)
        assert np.abs(Xs.mean(axis=0)).max() < 1e-12
        assert np.abs(Xs.std(axis=0) - 1.0).max() < 1e-12

    def test_constant_column_centered_zeros(self):
        X = np.column_stack([np.full(5, 7.0), np.arange(5.0)])
        Xs, scaler = standardize(X)
        assert np.array_equal(Xs[:, 0], np.zeros(5))
        assert scaler.stds[0] == 1.0

    def test_scaler_reproduces_bit_for_bit(self, rng):
        X = rng.normal(size=(10, 3))
        Xs, scaler = standardize(X)
        assert np.array_equal(apply_scaler(X, scaler), Xs)


class TestRbfKernel:
    def test_self_similarity_is_one(self, rng):
        A = rng.normal(size=(5, 3))
        K = rbf_kernel(A, A, eta=2.0)
        assert np.array_equal(np.diag(K), np.ones(5))

    def test_unit_distance_value(self):
        K = rbf_kernel([[0.0]], [[1.0]], eta=1.0)
        assert K[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-12)
        assert K[0, 0] == pytest.approx(0.36788, abs=1e-5)

    def test_symmetric_and_bounded(self, rng):
        A = rng.normal(size=(6, 4))
        K = rbf_kernel(A, A, eta=0.5)
        assert np.abs(K - K.T).max() < 1e-15
        assert K.min() > 0.0 and K.max() <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(LengthMismatch):
            rbf_kernel(np.zeros((2, 3)), np.zeros((2, 4)), eta=1.0)


@pytest.fixture(scope="module")
def two_point_model():
    return train_svm(np.array([[-1.0], [1.0]]), np.array([-1, 1]),
                     eta=1.0, C=10.0, tol=1e-10)


@pytest.fixture(scope="module")
def xor_model():
    return train_svm(XOR_X, XOR_Y, eta=1.0, C=10.0, tol=1e-10)


class TestTwoPointFixture:
    """1-D training set {x=-1: -1, x=+1: +1}; the two-variable dual is
    solvable by hand: alpha = 1 / (1 - exp(-4)), bias 0."""

    def test_closed_form_dual(self, two_point_model):
        alpha = 1.0 / (1.0 - np.exp(-4.0))
        assert len(two_point_model.dual_coeffs) == 2
        assert np.abs(np.sort(two_point_model.dual_coeffs) - [-alpha, alpha]).max() < 1e-9

    def test_boundary_at_origin(self, two_point_model):
        assert two_point_model.bias == pytest.approx(0.0, abs=1e-12)
        assert decision_function(two_point_model, [[0.0]])[0] == pytest.approx(0.0, abs=1e-12)

    def test_unit_margins_and_accuracy(self, two_point_model):
        X = np.array([[-1.0], [1.0]])
        f = decision_function(two_point_model, X)
        assert np.abs(np.array([-1, 1]) * f - 1.0).max() < 1e-9
        assert np.array_equal(predict(two_point_model, X), [-1, 1])


class TestXorFixture:
    def test_perfect_training_accuracy(self, xor_model):
        assert np.array_equal(predict(xor_model, XOR_X), XOR_Y)

    def test_margins_reach_one(self, xor_model):
        f = decision_function(xor_model, XOR_X)
        assert (XOR_Y * f).min() >= 1.0 - 1e-3

    def test_dual_feasibility(self, xor_model):
        alpha = np.abs(xor_model.dual_coeffs)
        assert np.all(alpha > 0.0)
        assert np.all(alpha <= 10.0 + 1e-12)
        assert abs(xor_model.dual_coeffs.sum()) < 1e-6


class TestInvariants:
    def test_separable_margins_and_feasibility(self, rng):
        X, y = separable_blobs(rng)
        model = train_svm(X, y, eta=0.5, C=10.0, tol=1e-8)
        margins = y * decision_function(model, X)
        assert margins.min() >= 1.0 - 1e-3
        alpha = np.abs(model.dual_coeffs)
        assert np.all(alpha <= 10.0 + 1e-12)
        assert abs(model.dual_coeffs.sum()) < 1e-6
        assert np.array_equal(predict(model, X), y)

    def test_duplicating_every_row_keeps_decision(self, rng):
        X, y = separable_blobs(rng)
        base = train_svm(X, y, eta=0.5, C=10.0, tol=1e-8)
        doubled = train_svm(np.vstack([X, X]), np.concatenate([y, y]),
                            eta=0.5, C=10.0, tol=1e-8)
        grid = rng.normal(scale=2.0, size=(80, 2))
        delta = decision_function(base, grid) - decision_function(doubled, grid)
        assert np.abs(delta).max() < 1e-6

    def test_label_flip_antisymmetry(self, rng):
        X, y = separable_blobs(rng)
        fwd = train_svm(X, y, eta=0.7, C=5.0, tol=1e-8)
        rev = train_svm(X, -y, eta=0.7, C=5.0, tol=1e-8)
        grid = rng.normal(scale=2.0, size=(50, 2))
        total = decision_function(fwd, grid) + decision_function(rev, grid)
        assert np.abs(total).max() < 1e-9

    def test_sign_zero_is_positive(self):
        model = SvmModel(
            eta=1.0, C=1.0, bias=0.0,
            scaler=Scaler(np.zeros(1), np.ones(1)),
            omega=np.array([0]),
            support_rows=np.empty((0, 1)),
            dual_coeffs=np.empty(0),
        )
        f = decision_function(model, [[3.0], [-2.0]])
        assert np.array_equal(f, np.zeros(2))
        assert np.array_equal(predict(model, [[3.0], [-2.0]]), [1, 1])


class TestSelectionHandling:
    def test_ignored_columns_cannot_change_predictions(self, rng):
        X_core, y = separable_blobs(rng)
        noise = rng.normal(size=(len(X_core), 3))
        X = np.column_stack([noise[:, :1], X_core, noise[:, 1:]])
        omega = np.array([1, 2])
        model = train_svm(X, y, omega=omega, eta=0.5, C=10.0, tol=1e-8)
        poisoned = X.copy()
        poisoned[:, 0] = 1e9
        poisoned[:, 3:] = -1e9
        assert np.array_equal(decision_function(model, X),
                              decision_function(model, poisoned))

    def test_narrow_rows_rejected(self, rng):
        X, y = separable_blobs(rng)
        model = train_svm(X, y, omega=np.array([0, 1]), eta=0.5, C=10.0)
        with pytest.raises(SchemaMismatch):
            decision_function(model, np.zeros((2, 1)))

    def test_empty_selection_rejected(self, rng):
        X, y = separable_blobs(rng)
        with pytest.raises(DegenerateData):
            train_svm(X, y, omega=np.array([], dtype=np.int64))

    def test_single_class_rejected(self, rng):
        X, _ = separable_blobs(rng)
        with pytest.raises(DegenerateData):
            train_svm(X, np.ones(len(X)))


class TestModelIO:
    def test_json_roundtrip_preserves_decisions(self, rng):
        X, y = separable_blobs(rng)
        model = train_svm(X, y, eta=0.5, C=10.0, tol=1e-8, schema_tag="v:3,L:1")
        back = SvmModel.from_json(model.to_json())
        grid = rng.normal(scale=2.0, size=(40, 2))
        assert np.array_equal(decision_function(model, grid),
                              decision_function(back, grid))
        assert back.eta == model.eta
        assert back.C == model.C
        assert back.schema_tag == "v:3,L:1"
        assert back.converged == model.converged
        assert np.array_equal(back.omega, model.omega)

    def test_save_load(self, rng, tmp_path):
        X, y = separable_blobs(rng)
        model = train_svm(X, y, eta=0.5, C=10.0)
        path = tmp_path / "model.json"
        model.save(path)
        back = SvmModel.load(path)
        assert np.array_equal(predict(back, X), predict(model, X))
