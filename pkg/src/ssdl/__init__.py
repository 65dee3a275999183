"""Semi-supervised dictionary learning with p-Laplacian attention
hypergraph pseudo-labels.

Pipeline: build a k-NN hypergraph over the samples, weight its hyperedges
through a p-Laplacian embedding of the hyperedge-affinity graph, propagate
partial labels into soft pseudo-labels in closed form, then train a
label-embedded dictionary and linear classifier by alternating coordinate
descent.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
from .classify import Prediction, accuracy, encode, predict
from .dictlearn import (
    DictionaryModel,
    TrainConfig,
    TrainTrace,
    init_model,
    objective,
    train,
    update_classifier,
    update_codes,
    update_dictionary,
)
from .errors import InputError, InvariantViolation, NumericalError
from .hypergraph import (
    Hypergraph,
    HypergraphConfig,
    build_hypergraph,
    degree_matrices,
)
from .matrixio import (
    FeatureMatrix,
    PartialLabels,
    SyntheticSpec,
    load_features,
    load_labels,
    load_model,
    make_synthetic,
    mask_labels,
    normalize_features,
    save_features,
    save_labels,
    save_model,
)
from .plap import (
    EdgeGraph,
    PLapConfig,
    PLapEmbedding,
    edge_affinity,
    laplacian_regularizer,
    plap_embedding,
    plap_regularizer,
)
from .pseudolabel import (
    LabelMatrix,
    PropagationConfig,
    build_initial_labels,
    propagate,
    propagation_cross_entropy,
)

__all__ = [
    "DictionaryModel",
    "EdgeGraph",
    "FeatureMatrix",
    "Hypergraph",
    "HypergraphConfig",
    "InputError",
    "InvariantViolation",
    "LabelMatrix",
    "NumericalError",
    "PLapConfig",
    "PLapEmbedding",
    "PartialLabels",
    "Prediction",
    "PropagationConfig",
    "SyntheticSpec",
    "TrainConfig",
    "TrainTrace",
    "accuracy",
    "build_hypergraph",
    "build_initial_labels",
    "degree_matrices",
    "edge_affinity",
    "encode",
    "init_model",
    "kernel_backend",
    "laplacian_regularizer",
    "load_features",
    "load_labels",
    "load_model",
    "make_synthetic",
    "mask_labels",
    "normalize_features",
    "objective",
    "plap_embedding",
    "plap_regularizer",
    "predict",
    "propagate",
    "propagation_cross_entropy",
    "save_features",
    "save_labels",
    "save_model",
    "train",
    "update_classifier",
    "update_codes",
    "update_dictionary",
]
