"""Label-embedded dictionary learning by alternating minimization.

Objective:

    ||X - D S||_F^2 + 2 alpha ||S||_1 + gamma ||F - B S||_F^2
    s.t. ||d_k||_2 <= 1, ||b_k||_2 <= 1

S is updated by exact cyclic coordinate descent (soft thresholding), D and
B column-by-column: each column is replaced by the residual correlation
direction, normalized to unit length, which is the exact minimizer of the
corresponding term over the unit sphere. Every block update is a
minimizer of its subproblem, so the objective trace is non-increasing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InputError, InvariantViolation, NumericalError
from .matrixio import FeatureMatrix
from .pseudolabel import LabelMatrix

MONOTONE_SLACK = 1e-9


@dataclass
class DictionaryModel:
    dictionary: np.ndarray  # (dim, K), unit columns after training
    classifier: np.ndarray  # (C, K), unit columns after training
    codes: np.ndarray | None  # (K, N) training codes; None for loaded models

    @property
    def n_atoms(self) -> int:
        return self.dictionary.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    k_atoms: int | None = None  # None = ceil(N/2)
    alpha: float = 2.0**-12
    gamma: float = 2.0**-12
    max_outer: int = 50
    obj_tol: float = 1e-5
    inner_sweeps: int = 1
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.alpha < 0 or self.gamma < 0:
            raise InputError("alpha and gamma must be >= 0")
        if self.k_atoms is not None and self.k_atoms < 1:
            raise InputError("k_atoms must be >= 1")
        if self.max_outer < 1:
            raise InputError("max_outer must be >= 1")
        if self.inner_sweeps < 1:
            raise InputError("inner_sweeps must be >= 1")
        return self

    def resolve_k(self, n_samples: int) -> int:
        k = self.k_atoms if self.k_atoms is not None else -(-n_samples // 2)
        if k > n_samples:
            warnings.warn(
                f"k_atoms={k} exceeds the sample count {n_samples}",
                RuntimeWarning,
                stacklevel=2,
            )
        return k


@dataclass
class TrainTrace:
    """Per-iteration objective breakdown; row 0 is the initial state."""

    iterations: list[int] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    reconstruction: list[float] = field(default_factory=list)
    l1: list[float] = field(default_factory=list)
    label: list[float] = field(default_factory=list)
    nnz_fraction: list[float] = field(default_factory=list)

    def append(self, it: int, terms: tuple[float, float, float], nnz: float) -> None:
        recon, l1, lab = terms
        self.iterations.append(it)
        self.total.append(recon + l1 + lab)
        self.reconstruction.append(recon)
        self.l1.append(l1)
        self.label.append(lab)
        self.nnz_fraction.append(nnz)

    def save_csv(self, path) -> None:
        with Path(path).open("w") as fh:
            fh.write("iteration,total,reconstruction,l1,label,nnz_fraction\n")
            for i in range(len(self.iterations)):
                fh.write(
                    "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                    % (
                        self.iterations[i],
                        self.total[i],
                        self.reconstruction[i],
                        self.l1[i],
                        self.label[i],
                        self.nnz_fraction[i],
                    )
                )


def _as_array(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _label_values(f) -> np.ndarray:
    if isinstance(f, LabelMatrix):
        return f.values
    return np.asarray(f, dtype=np.float64)


def _normalize_columns(mat: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=0)
    if np.any(norms == 0):
        raise InputError(f"zero-norm {what} column {int(np.argmax(norms == 0))}")
    return mat / norms


def init_model(x, f, cfg: TrainConfig) -> DictionaryModel:
    """Atoms are K distinct samples (seeded choice), classifier columns are
    normalized Gaussian draws, codes start at zero."""
    cfg.validate()
    data = _as_array(x)
    fv = _label_values(f)
    n = data.shape[1]
    if fv.shape[1] != n:
        raise InputError(f"{fv.shape[1]} label columns for {n} samples")
    k = cfg.resolve_k(n)
    if k > n:
        raise InputError(f"cannot draw {k} distinct atoms from {n} samples")
    rng = np.random.default_rng(cfg.seed)
    chosen = rng.choice(n, size=k, replace=False)
    dictionary = _normalize_columns(data[:, chosen].copy(), "atom")
    classifier = _normalize_columns(
        rng.standard_normal((fv.shape[0], k)), "classifier"
    )
    return DictionaryModel(dictionary, classifier, np.zeros((k, n)))


def _gram_and_target(model: DictionaryModel, data, fv, alpha, gamma):
    gram = model.dictionary.T @ model.dictionary
    if gamma != 0.0:
        gram = gram + gamma * (model.classifier.T @ model.classifier)
    target = model.dictionary.T @ data
    if gamma != 0.0:
        target = target + gamma * (model.classifier.T @ fv)
    diag = np.diagonal(gram)
    if np.any(diag <= 0):
        raise NumericalError(
            f"degenerate atom {int(np.argmax(diag <= 0))}: zero code denominator"
        )
    return np.ascontiguousarray(gram), np.ascontiguousarray(target)


def update_codes(model: DictionaryModel, x, f, cfg: TrainConfig) -> np.ndarray:
    """One (or cfg.inner_sweeps) soft-thresholding sweeps over all (k, n)."""
    data = _as_array(x)
    fv = _label_values(f)
    gram, target = _gram_and_target(model, data, fv, cfg.alpha, cfg.gamma)
    codes = np.ascontiguousarray(model.codes.copy())
    _kernels.cd_sweep(gram, target, codes, cfg.alpha, cfg.inner_sweeps)
    return codes


def update_dictionary(model: DictionaryModel, x) -> tuple[np.ndarray, list[int]]:
    """Column-wise replacement d_k = normalize((X - D~k S) S_k); atoms with
    empty rows of S (or a vanishing numerator) are left unchanged and
    reported as unused."""
    data = _as_array(x)
    return _bcd_columns(model.dictionary, model.codes, data)


def update_classifier(model: DictionaryModel, f) -> tuple[np.ndarray, list[int]]:
    """Same column-wise update with F in place of X and B in place of D."""
    fv = _label_values(f)
    return _bcd_columns(model.classifier, model.codes, fv)


def _bcd_columns(mat: np.ndarray, codes: np.ndarray, data: np.ndarray):
    out = mat.copy()
    gram = codes @ codes.T  # (K, K); column k is S S_k^T
    corr = data @ codes.T  # (dim, K); column k is X S_k^T
    unused: list[int] = []
    for k in range(out.shape[1]):
        if gram[k, k] == 0.0:
            unused.append(k)
            continue
        numerator = corr[:, k] - out @ gram[:, k] + out[:, k] * gram[k, k]
        norm = np.linalg.norm(numerator)
        if norm == 0.0:
            unused.append(k)
            continue
        out[:, k] = numerator / norm
    return out, unused


def objective(model: DictionaryModel, x, f, cfg: TrainConfig) -> float:
    recon, l1, lab = objective_terms(model, x, f, cfg)
    return recon + l1 + lab


def objective_terms(
    model: DictionaryModel, x, f, cfg: TrainConfig
) -> tuple[float, float, float]:
    data = _as_array(x)
    fv = _label_values(f)
    recon = float(np.sum((data - model.dictionary @ model.codes) ** 2))
    l1 = 2.0 * cfg.alpha * float(np.sum(np.abs(model.codes)))
    lab = cfg.gamma * float(np.sum((fv - model.classifier @ model.codes) ** 2))
    return recon, l1, lab


def train(x, f, cfg: TrainConfig) -> tuple[DictionaryModel, TrainTrace]:
    """Alternate codes -> dictionary -> classifier until the relative
    objective decrease falls below obj_tol or max_outer is reached.

    Codes are warm-started across outer iterations. An objective increase
    beyond 1e-9 absolute aborts: each block update minimizes its
    subproblem, so an increase means a bug.
    """
    cfg.validate()
    data = _as_array(x)
    fv = _label_values(f)
    model = init_model(data, fv, cfg)
    trace = TrainTrace()

    terms = objective_terms(model, data, fv, cfg)
    trace.append(0, terms, 0.0)
    prev = sum(terms)

    for it in range(1, cfg.max_outer + 1):
        model.codes = update_codes(model, data, fv, cfg)
        model.dictionary, _ = update_dictionary(model, data)
        model.classifier, _ = update_classifier(model, fv)

        terms = objective_terms(model, data, fv, cfg)
        current = sum(terms)
        if current > prev + MONOTONE_SLACK:
            raise InvariantViolation(
                f"objective rose from {prev!r} to {current!r} at iteration {it}"
            )
        nnz = float(np.mean(model.codes != 0.0))
        trace.append(it, terms, nnz)
        rel = (prev - current) / max(abs(prev), np.finfo(float).tiny)
        prev = current
        if rel < cfg.obj_tol:
            break

    return model, trace
