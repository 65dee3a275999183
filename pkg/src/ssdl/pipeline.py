"""End-to-end orchestration shared by the CLI and the test suite.

The transductive flow: the hypergraph and propagation run over all
samples (train and test features, but only the visible training labels),
the dictionary is trained on the training columns with their pseudo
labels, and accuracy/cross-entropy are measured on the held-out columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classify, dictlearn, hypergraph, plap, pseudolabel
from .errors import InputError
from .matrixio import (
    UNLABELED,
    FeatureMatrix,
    PartialLabels,
    mask_labels,
    normalize_features,
)


def preprocess_features(
    fm: FeatureMatrix, center: bool = True, normalize: bool = True
) -> FeatureMatrix:
    """Center to the global mean, then l2-normalize each sample.

    Unit-norm atoms and classifier columns put the dictionary scores on
    the scale of the codes, so the recipe expects unit-norm samples;
    centering first spreads the class directions over the sphere, which
    keeps the atoms from collapsing onto a few collinear directions.
    """
    out = fm
    if center:
        out = FeatureMatrix(
            out.data - out.data.mean(axis=1, keepdims=True), list(out.sample_ids)
        )
    if normalize:
        out = normalize_features(out)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a reproducible train/test run needs besides the data."""

    train_fraction: float = 0.7
    label_rate: float = 0.4
    seed: int = 0
    center: bool = True  # subtract the global feature mean
    normalize: bool = True  # per-sample l2; the recipe this family relies on
    use_attention: bool = True
    supervision: str = "pseudo"  # or "initial": train on O, skipping propagation
    hyper: hypergraph.HypergraphConfig = field(
        default_factory=hypergraph.HypergraphConfig
    )
    embed: plap.PLapConfig = field(default_factory=plap.PLapConfig)
    prop: pseudolabel.PropagationConfig = field(
        default_factory=pseudolabel.PropagationConfig
    )
    train: dictlearn.TrainConfig = field(default_factory=dictlearn.TrainConfig)


def split_stratified(
    truth: PartialLabels, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; deterministic in the seed."""
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for c in range(truth.num_classes):
        idx = rng.permutation(np.flatnonzero(truth.labels == c))
        cut = int(round(train_fraction * idx.size))
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def visible_training_labels(
    truth: PartialLabels,
    train_idx: np.ndarray,
    label_rate: float,
    seed: int,
) -> PartialLabels:
    """Full-length label vector: test columns hidden, training columns
    masked down to the target rate."""
    train_truth = PartialLabels(truth.labels[train_idx], truth.num_classes)
    masked = mask_labels(train_truth, label_rate, seed)
    out = np.full_like(truth.labels, UNLABELED)
    out[train_idx] = masked.labels
    return PartialLabels(out, truth.num_classes)


def build_regularizer(
    fm: FeatureMatrix,
    hyper_cfg: hypergraph.HypergraphConfig,
    embed_cfg: plap.PLapConfig,
    use_attention: bool = True,
    diagnostics: list | None = None,
) -> tuple[np.ndarray, dict]:
    """Hypergraph -> (attention | plain) Laplacian regularizer."""
    h = hypergraph.build_hypergraph(fm, hyper_cfg)
    info: dict = {"sigma": h.bandwidth, "n_edges": h.n_edges}
    if use_attention:
        g = plap.edge_affinity(h)
        emb = plap.plap_embedding(g, embed_cfg, diagnostics=diagnostics)
        delta = plap.plap_regularizer(h, emb)
        info["embedding"] = emb.meta
        info["eigenvalues"] = emb.eigenvalues
    else:
        delta = plap.laplacian_regularizer(h)
    return delta, info


def generate_pseudolabels(
    fm: FeatureMatrix,
    visible: PartialLabels,
    hyper_cfg: hypergraph.HypergraphConfig,
    embed_cfg: plap.PLapConfig,
    prop_cfg: pseudolabel.PropagationConfig,
    use_attention: bool = True,
    diagnostics: list | None = None,
) -> tuple[pseudolabel.LabelMatrix, dict]:
    if visible.n_samples != fm.n_samples:
        raise InputError(
            f"{visible.n_samples} labels for {fm.n_samples} samples"
        )
    delta, info = build_regularizer(
        fm, hyper_cfg, embed_cfg, use_attention, diagnostics
    )
    o = pseudolabel.build_initial_labels(visible)
    f = pseudolabel.propagate(o, delta, prop_cfg)
    return f, info


def scale_supervision(values: np.ndarray) -> np.ndarray:
    """Rescale each pseudo-label column to [0, 1] by its own range.

    The classifier columns are unit-norm, so its scores live on the scale
    of the codes; the propagation output keeps the class ranking but its
    contrast is compressed by the attention regularizer (the soft labels
    can sit within a few percent of each other). Range-scaling restores
    the one-hot magnitude that the dictionary objective expects while
    keeping genuinely ambiguous columns soft. Exactly uniform columns
    become zero (they carry no class signal).
    """
    mn = values.min(axis=0, keepdims=True)
    mx = values.max(axis=0, keepdims=True)
    span = mx - mn
    span[span == 0] = 1.0
    return (values - mn) / span


@dataclass
class ScenarioResult:
    accuracy: float
    cross_entropy: float | None
    model: dictlearn.DictionaryModel
    trace: dictlearn.TrainTrace
    train_idx: np.ndarray
    test_idx: np.ndarray
    visible: PartialLabels
    info: dict


def run_scenario(
    fm: FeatureMatrix, truth: PartialLabels, cfg: ScenarioConfig
) -> ScenarioResult:
    """Split, mask, propagate (unless supervising with O), train, score."""
    truth.validate(require_all_classes=True)
    fm = preprocess_features(fm, center=cfg.center, normalize=cfg.normalize)
    train_idx, test_idx = split_stratified(truth, cfg.train_fraction, cfg.seed)
    visible = visible_training_labels(truth, train_idx, cfg.label_rate, cfg.seed)

    ce: float | None = None
    if cfg.supervision == "pseudo":
        f, info = generate_pseudolabels(
            fm, visible, cfg.hyper, cfg.embed, cfg.prop, cfg.use_attention
        )
        ce = pseudolabel.propagation_cross_entropy(
            f, truth, mask="heldout_only", visible=visible
        )
        supervision = scale_supervision(f.values[:, train_idx])
    elif cfg.supervision == "initial":
        o = pseudolabel.build_initial_labels(
            PartialLabels(visible.labels[train_idx], truth.num_classes)
        )
        supervision = o.values
        info = {}
    else:
        raise InputError(f"unknown supervision mode {cfg.supervision!r}")

    x_train = fm.data[:, train_idx]
    model, trace = dictlearn.train(x_train, supervision, cfg.train)

    pred = classify.predict(model, fm.data[:, test_idx], cfg.train.alpha)
    test_truth = PartialLabels(truth.labels[test_idx], truth.num_classes)
    acc = classify.accuracy(pred, test_truth)
    return ScenarioResult(
        accuracy=acc,
        cross_entropy=ce,
        model=model,
        trace=trace,
        train_idx=train_idx,
        test_idx=test_idx,
        visible=visible,
        info=info,
    )
