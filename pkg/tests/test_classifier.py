"""SVM training against a direct dual-QP oracle, Platt calibration
against an independent MLE fit, and the probability-map invariants."""

import numpy as np
import pytest
from scipy.optimize import minimize

from stabman.classifier import (
    CalibratedSvm, LabeledSample, _platt_fit, _rbf, calibrate, load_model,
    predict_prob, save_model, train_svm,
)
from stabman.errors import NumericalError, ValidationError


def _mk(points, labels):
    return [LabeledSample(tuple(p), int(s)) for p, s in zip(points, labels)]


XOR = _mk([(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)], [0, 0, 1, 1])


def ring_data(n=200, seed=5):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, size=(n, 2))
    lab = (np.hypot(pts[:, 0], pts[:, 1]) < 1.0).astype(int)
    return _mk(pts, lab)


class TestTrain:
    def test_symmetric_pair_boundary(self):
        data = _mk([(0.0,), (1.0,)], [0, 1])
        m = train_svm(data)
        assert m.decision([(0.5,)])[0] == pytest.approx(0.0, abs=1e-9)
        assert m.decision([(0.0,)])[0] < 0 < m.decision([(1.0,)])[0]

    def test_xor_against_dual_qp_oracle(self):
        m = train_svm(XOR)
        x = np.array([s.rho for s in XOR])
        y = np.array([-1.0, -1.0, 1.0, 1.0])
        f = m.decision(x)
        assert np.all(np.sign(f) == y)

        k = _rbf(x, x, m.gamma)
        q = np.outer(y, y) * k
        res = minimize(
            lambda a: 0.5 * a @ q @ a - a.sum(),
            np.full(4, 0.1), jac=lambda a: q @ a - 1.0,
            method="SLSQP", bounds=[(0.0, 10.0)] * 4,
            constraints=[{"type": "eq", "fun": lambda a: a @ y,
                          "jac": lambda a: y}],
            options={"ftol": 1e-14, "maxiter": 500})
        coef_oracle = res.x * y
        f_oracle = k @ coef_oracle
        # compare margin-form decision values (bias cancels by symmetry)
        assert m.bias == pytest.approx(0.0, abs=1e-6)
        assert np.allclose(f, f_oracle, atol=1e-4)

    def test_contradictory_duplicates_complete(self):
        data = _mk([(0.3, 0.3), (0.3, 0.3), (0.9, 0.1)], [0, 1, 1])
        m = train_svm(data)
        assert np.all(np.isfinite(m.decision([(0.3, 0.3)])))

    def test_box_constraint_respected(self):
        m = train_svm(ring_data())
        alpha = np.abs(m.coef)
        assert np.all(alpha > 0)
        assert np.all(alpha <= 10.0 + 1e-12)

    def test_separable_margin_perfect_accuracy(self):
        rng = np.random.default_rng(2)
        left = rng.uniform(0.0, 0.4, size=(40, 2))
        right = rng.uniform(0.6, 1.0, size=(40, 2))
        data = _mk(np.vstack([left, right]), [0] * 40 + [1] * 40)
        m = train_svm(data)
        f = m.decision(np.vstack([left, right]))
        assert np.all(f[:40] < 0) and np.all(f[40:] > 0)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            train_svm(_mk([(0.0,), (1.0,)], [1, 1]))

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValidationError):
            train_svm(_mk([(0.0,)], [1]))


class TestCalibrate:
    def test_symmetric_data_half_at_zero(self):
        rng = np.random.default_rng(9)
        xs = rng.uniform(0.2, 1.0, 60)
        pts = np.concatenate([-xs, xs])[:, None]
        data = _mk(pts, [0] * 60 + [1] * 60)
        m = train_svm(data)
        cal = calibrate(m, data)
        z = cal.a * 0.0 + cal.b
        p0 = 1.0 / (1.0 + np.exp(z))
        assert p0 == pytest.approx(0.5, abs=1e-3)

    def test_monotone_in_decision_value(self):
        data = ring_data()
        cal = calibrate(train_svm(data), data)
        assert cal.a < 0  # probability increases with f
        f = np.linspace(-3, 3, 50)
        p = 1.0 / (1.0 + np.exp(cal.a * f + cal.b))
        assert np.all(np.diff(p) > 0)

    def test_newton_against_independent_mle(self):
        rng = np.random.default_rng(17)
        f = rng.normal(0.0, 1.5, 200)
        p_true = 1.0 / (1.0 + np.exp(-2.2 * f + 0.4))
        y = np.where(rng.uniform(size=200) < p_true, 1.0, -1.0)
        a, b = _platt_fit(f, y)

        n_pos = int(np.sum(y > 0))
        n_neg = 200 - n_pos
        t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0),
                     1.0 / (n_neg + 2.0))

        def nll(ab):
            z = ab[0] * f + ab[1]
            return np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                   (t - 1.0) * z + np.log1p(np.exp(z))))

        res = minimize(nll, [0.0, 0.0], method="BFGS",
                       options={"gtol": 1e-10, "maxiter": 500})
        assert a == pytest.approx(res.x[0], abs=1e-4)
        assert b == pytest.approx(res.x[1], abs=1e-4)

    def test_identical_decisions_rejected(self):
        pts = [(0.5, 0.5)] * 4
        data = _mk(pts, [0, 1, 0, 1])
        m = train_svm(data + _mk([(0.0, 0.0), (1.0, 1.0)], [0, 1]))
        clone = _mk(pts, [0, 1, 0, 1])
        with pytest.raises(NumericalError):
            calibrate(m, clone)


class TestPredict:
    def test_probabilities_strictly_inside_unit_interval(self):
        data = ring_data()
        cal = calibrate(train_svm(data), data)
        far = np.array([[50.0, 50.0], [-80.0, 3.0], [0.0, 0.0]])
        p = cal.predict(far)
        assert np.all(p > 0.0) and np.all(p < 1.0)

    def test_label_flip_complement(self):
        data = ring_data()
        flipped = [LabeledSample(d.rho, 1 - d.s) for d in data]
        cal = calibrate(train_svm(data), data)
        calf = calibrate(train_svm(flipped), flipped)
        q = np.random.default_rng(0).uniform(-2, 2, size=(50, 2))
        assert np.allclose(cal.predict(q) + calf.predict(q), 1.0, atol=1e-6)

    def test_affine_rescaling_invariance(self):
        data = ring_data()
        scale = np.array([3.0, 0.25])
        shift = np.array([-7.0, 11.0])
        moved = [LabeledSample(tuple(np.array(d.rho) * scale + shift), d.s)
                 for d in data]
        cal = calibrate(train_svm(data), data)
        calm = calibrate(train_svm(moved), moved)
        q = np.random.default_rng(1).uniform(-2, 2, size=(40, 2))
        assert np.allclose(cal.predict(q), calm.predict(q * scale + shift),
                           atol=1e-8)

    def test_repeat_calls_bitwise_equal(self):
        data = ring_data()
        cal = calibrate(train_svm(data), data)
        q = [(0.3, -0.4)]
        assert cal.predict(q)[0] == cal.predict(q)[0]
        assert predict_prob(cal, (0.3, -0.4)) == predict_prob(cal, (0.3, -0.4))

    def test_scalar_and_batch_forms(self):
        data = ring_data()
        cal = calibrate(train_svm(data), data)
        p1 = predict_prob(cal, (0.1, 0.2))
        pb = predict_prob(cal, [(0.1, 0.2), (1.5, 1.5)])
        assert isinstance(p1, float)
        assert pb.shape == (2,)
        assert pb[0] == p1

    def test_non_finite_query_rejected(self):
        cal = CalibratedSvm.constant(0.7, 2)
        with pytest.raises(ValidationError):
            predict_prob(cal, (np.nan, 0.0))

    def test_constant_model(self):
        cal = CalibratedSvm.constant(1.0, 3)
        assert cal.degenerate
        p = predict_prob(cal, (9.0, 9.0, 9.0))
        assert 0.0 < p < 1.0 and p == pytest.approx(1.0)


class TestSerialization:
    def test_round_trip_identical_predictions(self, tmp_path):
        data = ring_data()
        cal = calibrate(train_svm(data), data)
        path = tmp_path / "model.json"
        save_model(cal, path)
        back = load_model(path)
        q = np.random.default_rng(3).uniform(-2, 2, size=(30, 2))
        assert np.array_equal(cal.predict(q), back.predict(q))

    def test_constant_round_trip(self, tmp_path):
        cal = CalibratedSvm.constant(0.25, 2)
        path = tmp_path / "const.json"
        save_model(cal, path)
        back = load_model(path)
        assert back.degenerate and back.const_prob == 0.25

    def test_wrong_document_rejected(self):
        with pytest.raises(ValidationError):
            CalibratedSvm.from_dict({"kind": "something_else"})
