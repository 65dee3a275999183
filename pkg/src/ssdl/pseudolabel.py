"""Initial label embedding and closed-form soft pseudo-label propagation.

Propagation minimizes  tr(Delta F^T F) + lam ||F - O||_F^2  over F, whose
stationarity condition F (I + Delta/lam) = O is solved directly on the
sample axis (Delta is symmetric N x N, O and F are C x N).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import InputError, NumericalError
from .matrixio import PartialLabels

RIDGE = 1e-10


@dataclass
class LabelMatrix:
    values: np.ndarray  # (C, N)
    kind: str  # "initial_O" or "pseudo_F"

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PropagationConfig:
    lam: float = 0.1

    def validate(self) -> "PropagationConfig":
        if self.lam <= 0:
            raise InputError(f"propagation weight must be positive, got {self.lam}")
        return self


def build_initial_labels(labels: PartialLabels) -> LabelMatrix:
    """One-hot columns for labeled samples, constant 0.5 for unlabeled."""
    labels.validate()
    c, n = labels.num_classes, labels.n_samples
    values = np.full((c, n), 0.5)
    labeled = labels.labels >= 0
    values[:, labeled] = 0.0
    values[labels.labels[labeled], np.flatnonzero(labeled)] = 1.0
    return LabelMatrix(values, "initial_O")


def propagate(
    o: LabelMatrix, delta: np.ndarray, cfg: PropagationConfig
) -> LabelMatrix:
    """Solve F (I + Delta/lam) = O with a symmetric factorization.

    A singular system gets one retry with a 1e-10 ridge (warned); if the
    residual still exceeds 1e-8 * max|O| the solve is reported as failed
    together with the smallest eigenvalue of the system matrix.
    """
    cfg.validate()
    n = o.n_samples
    if delta.shape != (n, n):
        raise InputError(f"regularizer is {delta.shape}, labels have {n} samples")
    if not np.allclose(delta, delta.T, rtol=0, atol=1e-10):
        raise InputError("regularizer must be symmetric")

    system = np.eye(n) + delta / cfg.lam
    tol = 1e-8 * max(float(np.max(np.abs(o.values))), np.finfo(float).tiny)

    def _try(mat: np.ndarray) -> np.ndarray | None:
        try:
            ft = scipy.linalg.solve(mat, o.values.T, assume_a="sym")
        except (scipy.linalg.LinAlgError, ValueError):
            return None
        f = ft.T
        if not np.isfinite(f).all():
            return None
        if np.max(np.abs(f @ system - o.values)) > tol:
            return None
        return f

    f = _try(system)
    if f is None:
        warnings.warn(
            f"propagation system near-singular, retrying with ridge {RIDGE:g}",
            RuntimeWarning,
            stacklevel=2,
        )
        f = _try(system + RIDGE * np.eye(n))
    if f is None:
        smallest = float(np.min(np.linalg.eigvalsh((system + system.T) / 2.0)))
        raise NumericalError(
            f"propagation solve failed; smallest system eigenvalue ~ {smallest:.3e}"
        )
    return LabelMatrix(f, "pseudo_F")


def _softmax_columns(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def propagation_cross_entropy(
    f: LabelMatrix,
    truth: PartialLabels,
    mask: str = "all_labeled",
    visible: PartialLabels | None = None,
) -> float:
    """Mean softmax cross-entropy of pseudo-label columns against truth.

    mask "all_labeled" scores every column with ground truth; mask
    "heldout_only" scores only those whose label was hidden from
    propagation, which requires `visible` (the labels propagation saw).
    """
    if f.kind != "pseudo_F":
        raise InputError("cross-entropy expects a propagated label matrix")
    if truth.n_samples != f.n_samples:
        raise InputError(
            f"{truth.n_samples} truth labels for {f.n_samples} columns"
        )
    selected = truth.labels >= 0
    if mask == "heldout_only":
        if visible is None:
            raise InputError("heldout_only mask needs the visible labels")
        if visible.n_samples != f.n_samples:
            raise InputError("visible labels do not match the column count")
        selected &= visible.labels < 0
    elif mask != "all_labeled":
        raise InputError(f"unknown mask {mask!r}")
    cols = np.flatnonzero(selected)
    if cols.size == 0:
        raise InputError("no columns selected for cross-entropy")
    probs = _softmax_columns(f.values[:, cols])
    true_probs = probs[truth.labels[cols], np.arange(cols.size)]
    return float(np.mean(-np.log(true_probs)))


def save_pseudolabels(path, f: LabelMatrix) -> None:
    """CSV export: one row per class, then an argmax row."""
    with Path(path).open("w") as fh:
        fh.write(f"# classes={f.num_classes},n={f.n_samples}\n")
        for row in f.values:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
        argmax = np.argmax(f.values, axis=0)
        fh.write(",".join(str(int(v)) for v in argmax) + "\n")


def load_pseudolabels(path) -> LabelMatrix:
    path = Path(path)
    if not path.exists():
        raise InputError(f"pseudo-label file not found: {path}")
    with path.open() as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    header = lines[0].lstrip("#").strip()
    try:
        parts = dict(kv.split("=") for kv in header.split(","))
        c, n = int(parts["classes"]), int(parts["n"])
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: malformed pseudo-label header") from exc
    if len(lines) != c + 2:
        raise InputError(f"{path}: expected {c} class rows plus an argmax row")
    values = np.empty((c, n))
    for r in range(c):
        cells = lines[1 + r].split(",")
        if len(cells) != n:
            raise InputError(f"{path}: row {r} has {len(cells)} cells, expected {n}")
        values[r] = [float(tok) for tok in cells]
    if not np.isfinite(values).all():
        raise InputError(f"{path}: non-finite pseudo-label value")
    return LabelMatrix(values, "pseudo_F")
