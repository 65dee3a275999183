"""Inference with a trained dictionary: lasso encoding, linear scoring."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .dictlearn import DictionaryModel
from .errors import InputError, NumericalError
from .matrixio import FeatureMatrix, PartialLabels


@dataclass
class Prediction:
    scores: np.ndarray  # (C, N_test) = B @ codes
    labels: np.ndarray  # (N_test,) argmax, ties to the lowest class index
    codes: np.ndarray  # (K, N_test)


def _as_array(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return x.data
    return np.asarray(x, dtype=np.float64)


def encode(
    model: DictionaryModel,
    x_test,
    alpha: float,
    tol: float = 1e-5,
    max_sweeps: int = 50,
) -> np.ndarray:
    """Coordinate descent on ||x - D s||^2 + 2 alpha |s|_1 per sample.

    Same stopping rule as training: sweeps end when the relative decrease
    of the coding objective falls below tol.
    """
    data = _as_array(x_test)
    if data.ndim != 2 or data.shape[0] != model.dictionary.shape[0]:
        raise InputError(
            f"test data is {data.shape}, dictionary expects "
            f"{model.dictionary.shape[0]} rows"
        )
    gram = np.ascontiguousarray(model.dictionary.T @ model.dictionary)
    diag = np.diagonal(gram)
    if np.any(diag <= 0):
        raise NumericalError(
            f"degenerate atom {int(np.argmax(diag <= 0))}: zero code denominator"
        )
    target = np.ascontiguousarray(model.dictionary.T @ data)
    codes = np.zeros((model.n_atoms, data.shape[1]))
    const = float(np.sum(data * data))
    prev = _kernels.cd_objective(gram, target, codes, alpha, const)
    for _ in range(max_sweeps):
        _kernels.cd_sweep(gram, target, codes, alpha, 1)
        current = _kernels.cd_objective(gram, target, codes, alpha, const)
        rel = (prev - current) / max(abs(prev), np.finfo(float).tiny)
        prev = current
        if rel < tol:
            break
    return codes


def predict(
    model: DictionaryModel,
    x_test,
    alpha: float,
    tol: float = 1e-5,
    max_sweeps: int = 50,
) -> Prediction:
    codes = encode(model, x_test, alpha, tol=tol, max_sweeps=max_sweeps)
    scores = model.classifier @ codes
    labels = np.argmax(scores, axis=0)
    return Prediction(scores=scores, labels=labels, codes=codes)


def accuracy(pred: Prediction, truth: PartialLabels) -> float:
    """Fraction of correctly labeled columns among those with ground truth."""
    if truth.n_samples != pred.labels.shape[0]:
        raise InputError(
            f"{truth.n_samples} truth labels for {pred.labels.shape[0]} predictions"
        )
    evaluated = truth.labels >= 0
    if not evaluated.any():
        raise InputError("empty evaluation set")
    return float(np.mean(pred.labels[evaluated] == truth.labels[evaluated]))


def save_predictions(path, pred: Prediction, sample_ids: list[str]) -> None:
    """CSV: sample id, predicted class, per-class scores."""
    c = pred.scores.shape[0]
    with Path(path).open("w") as fh:
        header = ",".join(["sample_id", "predicted"] + [f"score_{i}" for i in range(c)])
        fh.write(header + "\n")
        for j, sid in enumerate(sample_ids):
            scores = ",".join("%.17g" % v for v in pred.scores[:, j])
            fh.write(f"{sid},{int(pred.labels[j])},{scores}\n")
