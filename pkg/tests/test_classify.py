import numpy as np
import pytest

from ssdl.classify import Prediction, accuracy, encode, predict, save_predictions
from ssdl.dictlearn import DictionaryModel, TrainConfig, init_model, update_codes
from ssdl.errors import InputError
from ssdl.matrixio import PartialLabels


def orthonormal_dictionary(dim, k, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q


def test_encode_recovers_scaled_atom():
    d = orthonormal_dictionary(6, 4, seed=0)
    model = DictionaryModel(d, np.zeros((2, 4)), None)
    c, alpha = 0.8, 2.0**-12
    x = (c * d[:, 2])[:, None]
    codes = encode(model, x, alpha)
    assert np.argmax(np.abs(codes[:, 0])) == 2
    assert codes[2, 0] == pytest.approx(c - alpha, abs=1e-12)
    others = np.delete(codes[:, 0], 2)
    np.testing.assert_allclose(others, 0.0, atol=1e-12)


def test_encode_zero_input_gives_zero_codes():
    d = orthonormal_dictionary(5, 3, seed=1)
    model = DictionaryModel(d, np.zeros((2, 3)), None)
    codes = encode(model, np.zeros((5, 4)), alpha=0.01)
    assert np.all(codes == 0.0)


def test_encode_alpha_zero_solves_least_squares():
    rng = np.random.default_rng(2)
    d = rng.standard_normal((6, 4))
    d /= np.linalg.norm(d, axis=0)
    model = DictionaryModel(d, np.zeros((2, 4)), None)
    x = rng.standard_normal((6, 5))
    codes = encode(model, x, alpha=0.0, tol=1e-14, max_sweeps=5000)
    grad = 2.0 * d.T @ (d @ codes - x)
    assert np.max(np.abs(grad)) <= 1e-6


def test_encode_matches_update_codes_objective():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((5, 10))
    cfg = TrainConfig(k_atoms=4, alpha=0.02, gamma=0.0, seed=0, inner_sweeps=400)
    model = init_model(x, np.zeros((2, 10)), cfg)
    model.codes = update_codes(model, x, np.zeros((2, 10)), cfg)
    train_obj = np.sum((x - model.dictionary @ model.codes) ** 2) + 2 * cfg.alpha * np.sum(
        np.abs(model.codes)
    )
    codes = encode(model, x, cfg.alpha, tol=1e-14, max_sweeps=400)
    enc_obj = np.sum((x - model.dictionary @ codes) ** 2) + 2 * cfg.alpha * np.sum(
        np.abs(codes)
    )
    assert enc_obj == pytest.approx(train_obj, abs=1e-8)


def test_predict_identity_classifier_and_tie_break():
    k = 3
    model = DictionaryModel(np.eye(k), np.eye(k), None)
    pred = predict(model, np.eye(k)[:, [1]], alpha=0.0)
    assert pred.labels[0] == 1

    pred = predict(model, np.zeros((k, 2)), alpha=0.0)
    np.testing.assert_array_equal(pred.labels, [0, 0])  # ties -> lowest class


def test_scale_invariance_at_alpha_zero():
    rng = np.random.default_rng(4)
    d = orthonormal_dictionary(5, 4, seed=5)
    model = DictionaryModel(d, rng.standard_normal((3, 4)), None)
    x = rng.standard_normal((5, 6))
    c = 3.7
    p1 = predict(model, x, alpha=0.0)
    p2 = predict(model, c * x, alpha=0.0)
    np.testing.assert_allclose(p2.scores, c * p1.scores, rtol=1e-9)
    np.testing.assert_allclose(p2.codes, c * p1.codes, rtol=1e-9)
    np.testing.assert_array_equal(p2.labels, p1.labels)


def test_accuracy_basic_and_complement():
    pred = Prediction(
        scores=np.zeros((2, 4)),
        labels=np.array([0, 1, 0, 1]),
        codes=np.zeros((1, 4)),
    )
    truth = PartialLabels(np.array([0, 1, 0, 1]), 2)
    assert accuracy(pred, truth) == 1.0
    flipped = PartialLabels(1 - truth.labels, 2)
    assert accuracy(pred, flipped) == pytest.approx(1.0 - 1.0)

    partial = PartialLabels(np.array([0, -1, 1, -1]), 2)
    assert accuracy(pred, partial) == pytest.approx(0.5)

    with pytest.raises(InputError, match="empty"):
        accuracy(pred, PartialLabels(np.array([-1, -1, -1, -1]), 2))


def test_dimension_mismatch_rejected():
    model = DictionaryModel(np.eye(3), np.eye(3), None)
    with pytest.raises(InputError):
        encode(model, np.zeros((4, 2)), alpha=0.0)


def test_save_predictions_layout(tmp_path):
    pred = Prediction(
        scores=np.array([[1.5, 0.0], [0.5, 2.0]]),
        labels=np.array([0, 1]),
        codes=np.zeros((2, 2)),
    )
    save_predictions(tmp_path / "p.csv", pred, ["a", "b"])
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "sample_id,predicted,score_0,score_1"
    assert lines[1].startswith("a,0,1.5,")
    assert lines[2].startswith("b,1,0,")
