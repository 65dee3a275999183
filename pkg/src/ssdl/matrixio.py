"""Feature/label/model ingestion, persistence, and synthetic datasets.

File formats:
  feature CSV   line 1: "# dim=<d>,n=<n>"; line 2: comma-separated sample
                ids; then d rows of n decimal floats.
  feature binary  magic "SSDLMAT1", u32 dim, u32 n (little-endian), then
                dim*n float64 values column-major. Carries no sample ids;
                loading synthesizes "s<index>" ids.
  label file    n lines, one signed integer each; -1 marks unlabeled.
  model file    magic "SSDLMOD1", u32 dim, u32 K, u32 C, then D and B as
                float64 column-major blocks.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

MAT_MAGIC = b"SSDLMAT1"
MODEL_MAGIC = b"SSDLMOD1"

UNLABELED = -1


@dataclass
class FeatureMatrix:
    """Dense sample embeddings, one column per sample."""

    data: np.ndarray  # (dim, n)
    sample_ids: list[str]

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def validate(self) -> "FeatureMatrix":
        if self.data.ndim != 2:
            raise InputError("feature matrix must be 2-D")
        d, n = self.data.shape
        if d < 1 or n < 2:
            raise InputError(f"feature matrix needs dim >= 1 and n >= 2, got {d}x{n}")
        if not np.isfinite(self.data).all():
            bad = np.argwhere(~np.isfinite(self.data))[0]
            raise InputError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        if len(self.sample_ids) != n:
            raise InputError(
                f"{len(self.sample_ids)} sample ids for {n} columns"
            )
        seen: dict[str, int] = {}
        for col, sid in enumerate(self.sample_ids):
            if sid in seen:
                raise InputError(
                    f"duplicate sample id {sid!r} at columns {seen[sid]} and {col}"
                )
            seen[sid] = col
        return self


@dataclass
class PartialLabels:
    """Integer labels in {-1, 0, ..., C-1}; -1 means unlabeled."""

    labels: np.ndarray  # (n,) int
    num_classes: int

    @property
    def label_rate(self) -> float:
        return float(np.mean(self.labels >= 0))

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    def validate(self, require_all_classes: bool = False) -> "PartialLabels":
        if self.num_classes < 2:
            raise InputError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.labels.size == 0:
            raise InputError("empty label vector")
        lo, hi = int(self.labels.min()), int(self.labels.max())
        if lo < -1 or hi >= self.num_classes:
            bad = int(np.argmax((self.labels < -1) | (self.labels >= self.num_classes)))
            raise InputError(
                f"label {int(self.labels[bad])} at line {bad + 1} outside "
                f"{{-1, 0..{self.num_classes - 1}}}"
            )
        if require_all_classes:
            present = set(self.labels[self.labels >= 0].tolist())
            missing = sorted(set(range(self.num_classes)) - present)
            if missing:
                raise InputError(f"classes {missing} have no labeled sample")
        return self


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic Gaussian-blob dataset description."""

    num_classes: int
    samples_per_class: int
    dim: int
    cluster_spread: float
    seed: int

    def validate(self) -> "SyntheticSpec":
        if self.num_classes < 2:
            raise InputError("need at least 2 classes")
        if self.samples_per_class < 1:
            raise InputError("need at least 1 sample per class")
        if self.dim < 1:
            raise InputError("need dim >= 1")
        if self.cluster_spread < 0:
            raise InputError("cluster_spread must be >= 0")
        return self


def _fmt(x: float) -> str:
    return "%.17g" % x


def save_features(path, fm: FeatureMatrix, format: str = "csv") -> None:
    fm.validate()
    path = Path(path)
    if format == "csv":
        for sid in fm.sample_ids:
            if "," in sid or "\n" in sid:
                raise InputError(f"sample id {sid!r} contains a separator")
        with path.open("w") as fh:
            fh.write(f"# dim={fm.dim},n={fm.n_samples}\n")
            fh.write(",".join(fm.sample_ids) + "\n")
            for row in fm.data:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    elif format == "binary":
        with path.open("wb") as fh:
            fh.write(MAT_MAGIC)
            fh.write(struct.pack("<II", fm.dim, fm.n_samples))
            fh.write(np.asfortranarray(fm.data, dtype="<f8").tobytes(order="F"))
    else:
        raise InputError(f"unknown feature format {format!r}")


def _parse_header(line: str, path) -> tuple[int, int]:
    line = line.strip()
    if not line.startswith("#"):
        raise InputError(f"{path}: line 1 must start with '# dim=...,n=...'")
    body = line.lstrip("#").strip()
    try:
        parts = dict(kv.split("=") for kv in body.split(","))
        dim, n = int(parts["dim"]), int(parts["n"])
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: malformed header {line!r}") from exc
    if dim < 1 or n < 2:
        raise InputError(f"{path}: header declares dim={dim}, n={n}")
    return dim, n


def _parse_float(token: str, row: int, col: int, path) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InputError(
            f"{path}: non-numeric cell {token!r} at data row {row}, column {col}"
        ) from None
    if not np.isfinite(value):
        raise InputError(
            f"{path}: non-finite value {token!r} at data row {row}, column {col}"
        )
    return value


def load_features(path, format: str = "csv") -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise InputError(f"features file not found: {path}")
    if format == "csv":
        with path.open() as fh:
            lines = fh.read().splitlines()
        if len(lines) < 3:
            raise InputError(f"{path}: expected header, ids, and data rows")
        dim, n = _parse_header(lines[0], path)
        ids = [s.strip() for s in lines[1].split(",")]
        if len(ids) != n:
            raise InputError(f"{path}: {len(ids)} sample ids, header says n={n}")
        data_lines = [ln for ln in lines[2:] if ln.strip()]
        if len(data_lines) != dim:
            raise InputError(
                f"{path}: {len(data_lines)} data rows, header says dim={dim}"
            )
        data = np.empty((dim, n))
        for r, ln in enumerate(data_lines):
            cells = ln.split(",")
            if len(cells) != n:
                raise InputError(
                    f"{path}: data row {r} has {len(cells)} cells, expected {n}"
                )
            for c, tok in enumerate(cells):
                data[r, c] = _parse_float(tok.strip(), r, c, path)
        return FeatureMatrix(data, ids).validate()
    if format == "binary":
        raw = path.read_bytes()
        if raw[:8] != MAT_MAGIC:
            raise InputError(f"{path}: bad magic, not a feature binary")
        dim, n = struct.unpack("<II", raw[8:16])
        expected = 16 + dim * n * 8
        if len(raw) != expected:
            raise InputError(f"{path}: {len(raw)} bytes, expected {expected}")
        data = np.frombuffer(raw[16:], dtype="<f8").reshape((dim, n), order="F")
        ids = [f"s{i}" for i in range(n)]
        return FeatureMatrix(np.ascontiguousarray(data), ids).validate()
    raise InputError(f"unknown feature format {format!r}")


def save_labels(path, labels: PartialLabels) -> None:
    with Path(path).open("w") as fh:
        for v in labels.labels:
            fh.write(f"{int(v)}\n")


def load_labels(path, num_classes: int) -> PartialLabels:
    path = Path(path)
    if not path.exists():
        raise InputError(f"labels file not found: {path}")
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                values.append(int(tok))
            except ValueError:
                raise InputError(
                    f"{path}: non-integer label {tok!r} at line {lineno}"
                ) from None
    labels = PartialLabels(np.asarray(values, dtype=np.int64), num_classes)
    return labels.validate()


def make_synthetic(spec: SyntheticSpec) -> tuple[FeatureMatrix, PartialLabels]:
    """Gaussian blobs: one center per class, uniform in [0, 10)^dim.

    The same SyntheticSpec always yields bit-identical data; columns are
    grouped by class.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform(0.0, 10.0, size=(spec.dim, spec.num_classes))
    n = spec.num_classes * spec.samples_per_class
    data = np.empty((spec.dim, n))
    labels = np.empty(n, dtype=np.int64)
    for c in range(spec.num_classes):
        sl = slice(c * spec.samples_per_class, (c + 1) * spec.samples_per_class)
        noise = rng.standard_normal((spec.dim, spec.samples_per_class))
        data[:, sl] = centers[:, c : c + 1] + spec.cluster_spread * noise
        labels[sl] = c
    ids = [f"synth{i:05d}" for i in range(n)]
    fm = FeatureMatrix(data, ids).validate()
    return fm, PartialLabels(labels, spec.num_classes).validate()


def mask_labels(labels: PartialLabels, rate: float, seed: int) -> PartialLabels:
    """Hide labels down to the target rate, keeping >= 1 per class visible."""
    if not 0.0 < rate <= 1.0:
        raise InputError(f"label rate must be in (0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    out = np.full_like(labels.labels, UNLABELED)
    for c in range(labels.num_classes):
        idx = np.flatnonzero(labels.labels == c)
        if idx.size == 0:
            continue
        keep = max(1, int(round(rate * idx.size)))
        chosen = rng.permutation(idx)[:keep]
        out[chosen] = c
    return PartialLabels(out, labels.num_classes)


def normalize_features(fm: FeatureMatrix) -> FeatureMatrix:
    """Per-sample l2 normalization (config flag, off by default)."""
    norms = np.linalg.norm(fm.data, axis=0)
    if np.any(norms == 0):
        raise InputError(f"cannot normalize zero column {int(np.argmax(norms == 0))}")
    return FeatureMatrix(fm.data / norms, list(fm.sample_ids))


def save_model(path, model) -> None:
    d = np.asarray(model.dictionary, dtype=np.float64)
    b = np.asarray(model.classifier, dtype=np.float64)
    dim, k = d.shape
    c = b.shape[0]
    if b.shape[1] != k:
        raise InputError(f"dictionary has {k} atoms but classifier has {b.shape[1]}")
    with Path(path).open("wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<III", dim, k, c))
        fh.write(d.astype("<f8").tobytes(order="F"))
        fh.write(b.astype("<f8").tobytes(order="F"))


def load_model(path):
    from .dictlearn import DictionaryModel

    path = Path(path)
    if not path.exists():
        raise InputError(f"model file not found: {path}")
    raw = path.read_bytes()
    if raw[:8] != MODEL_MAGIC:
        raise InputError(f"{path}: bad magic, not a model file")
    dim, k, c = struct.unpack("<III", raw[8:20])
    expected = 20 + (dim * k + c * k) * 8
    if len(raw) != expected:
        raise InputError(f"{path}: {len(raw)} bytes, expected {expected}")
    off = 20
    d = np.frombuffer(raw[off : off + dim * k * 8], dtype="<f8").reshape(
        (dim, k), order="F"
    )
    off += dim * k * 8
    b = np.frombuffer(raw[off:], dtype="<f8").reshape((c, k), order="F")
    return DictionaryModel(
        dictionary=np.ascontiguousarray(d),
        classifier=np.ascontiguousarray(b),
        codes=None,
    )
