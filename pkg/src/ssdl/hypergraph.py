"""Hypergraph construction from a feature matrix.

One hyperedge per sample: the sample itself (centroid) plus its k nearest
neighbors under Euclidean distance. Incidence entries carry a Gaussian
kernel of the distance to the centroid; hyperedge weights start uniform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .matrixio import FeatureMatrix

HGR_MAGIC = b"SSDLHGR1"

DEFAULT_K = 10


@dataclass
class Hypergraph:
    incidence: np.ndarray  # (|V|, |E|), entries in [0, 1]
    edge_weights: np.ndarray  # (|E|,) positive
    vertex_degrees: np.ndarray  # (|V|,) d(v) = sum_e W(e) H(v,e)
    edge_degrees: np.ndarray  # (|E|,) delta(e) = sum_v H(v,e)
    centroids: np.ndarray | None = None  # (|E|,) centroid vertex per edge
    bandwidth: float | None = None  # sigma used for the Gaussian kernel

    @property
    def n_vertices(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]

    @classmethod
    def from_incidence(
        cls,
        incidence: np.ndarray,
        edge_weights: np.ndarray | None = None,
        centroids: np.ndarray | None = None,
        bandwidth: float | None = None,
    ) -> "Hypergraph":
        """Assemble degrees from an explicit incidence matrix."""
        h = np.asarray(incidence, dtype=np.float64)
        if edge_weights is None:
            w = np.ones(h.shape[1])
        else:
            w = np.asarray(edge_weights, dtype=np.float64)
        return cls(
            incidence=h,
            edge_weights=w,
            vertex_degrees=h @ w,
            edge_degrees=h.sum(axis=0),
            centroids=centroids,
            bandwidth=bandwidth,
        )


@dataclass(frozen=True)
class HypergraphConfig:
    """k_neighbors=None picks min(10, N-1); an explicit k must be < N."""

    k_neighbors: int | None = None
    bandwidth_mode: str = "median_pairwise"  # or "fixed"
    bandwidth: float | None = None  # sigma when mode is "fixed"
    initial_edge_weight: float = 1.0

    def validate(self) -> "HypergraphConfig":
        if self.bandwidth_mode not in ("median_pairwise", "fixed"):
            raise InputError(f"unknown bandwidth mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "fixed":
            if self.bandwidth is None or self.bandwidth <= 0:
                raise InputError("fixed bandwidth mode needs a positive sigma")
        if self.k_neighbors is not None and self.k_neighbors < 1:
            raise InputError("k_neighbors must be >= 1")
        if self.initial_edge_weight <= 0:
            raise InputError("initial_edge_weight must be positive")
        return self


def _pairwise_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x.T @ x)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def build_hypergraph(fm: FeatureMatrix, cfg: HypergraphConfig) -> Hypergraph:
    """One hyperedge per sample over its k nearest Euclidean neighbors.

    H(v, e) = exp(-dist(v, centroid_e)^2 / sigma^2) for members, 0
    otherwise, so the centroid always gets incidence exactly 1.
    """
    cfg.validate()
    x = fm.data
    n = fm.n_samples
    if cfg.k_neighbors is None:
        k = min(DEFAULT_K, n - 1)
    else:
        k = cfg.k_neighbors
        if k >= n:
            raise InputError(f"k_neighbors={k} needs at least {k + 1} samples, got {n}")

    dist = _pairwise_distances(x)
    if not np.isfinite(dist).all():
        raise InputError("non-finite pairwise distance")

    if cfg.bandwidth_mode == "median_pairwise":
        iu = np.triu_indices(n, k=1)
        sigma = float(np.median(dist[iu]))
        if sigma == 0.0:
            raise InputError(
                "median pairwise distance is zero (duplicate points); "
                "use a fixed bandwidth"
            )
    else:
        sigma = float(cfg.bandwidth)  # type: ignore[arg-type]

    incidence = np.zeros((n, n))
    centroids = np.arange(n)
    for e in range(n):
        order = np.argsort(dist[e], kind="stable")
        members = order[order != e][:k]
        incidence[e, e] = 1.0
        incidence[members, e] = np.exp(-((dist[members, e] / sigma) ** 2))

    weights = np.full(n, cfg.initial_edge_weight)
    return Hypergraph(
        incidence=incidence,
        edge_weights=weights,
        vertex_degrees=incidence @ weights,
        edge_degrees=incidence.sum(axis=0),
        centroids=centroids,
        bandwidth=sigma,
    )


def degree_matrices(h: Hypergraph) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal degree matrices (D_v, D_e), revalidated against H and W."""
    dv = h.incidence @ h.edge_weights
    de = h.incidence.sum(axis=0)
    if not np.allclose(dv, h.vertex_degrees, rtol=0, atol=1e-12):
        raise InputError("stored vertex degrees disagree with H and W")
    if not np.allclose(de, h.edge_degrees, rtol=0, atol=1e-12):
        raise InputError("stored edge degrees disagree with H")
    if np.any(dv <= 0):
        v = int(np.argmax(dv <= 0))
        raise InputError(f"vertex {v} is isolated (zero degree)")
    if np.any(de <= 0):
        e = int(np.argmax(de <= 0))
        raise InputError(f"hyperedge {e} is empty (zero degree)")
    return np.diag(dv), np.diag(de)


def save_incidence(path, h: Hypergraph, format: str = "csv") -> None:
    """Debug dump of H, reusing the feature-CSV layout or a binary twin."""
    path = Path(path)
    if format == "csv":
        with path.open("w") as fh:
            fh.write(f"# dim={h.n_vertices},n={h.n_edges}\n")
            fh.write(",".join(f"e{j}" for j in range(h.n_edges)) + "\n")
            for row in h.incidence:
                fh.write(",".join("%.17g" % v for v in row) + "\n")
    elif format == "binary":
        with path.open("wb") as fh:
            fh.write(HGR_MAGIC)
            fh.write(struct.pack("<II", h.n_vertices, h.n_edges))
            fh.write(h.incidence.astype("<f8").tobytes(order="F"))
    else:
        raise InputError(f"unknown incidence format {format!r}")
