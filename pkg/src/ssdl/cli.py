"""Batch CLI for the pipeline: synth, pseudolabel, train, predict,
evaluate, sweep.

Precedence: built-in defaults < config file (flat key=value) < flags.
Every command writes a <out>.meta run-metadata file. Exit codes: 0 ok,
2 input error, 3 numerical failure, 4 invariant violation.
"""

from __future__ import annotations

import functools
import os
import platform
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click
import numpy as np

from . import __version__, _kernels, classify, dictlearn, hypergraph, matrixio
from . import pipeline, plap, pseudolabel
from .errors import InputError, InvariantViolation, NumericalError


@dataclass(frozen=True)
class RunConfig:
    format: str = "csv"
    normalize: bool = False
    center: bool = False
    k_neighbors: int | None = None
    bandwidth: str = "median"  # "median" or a float literal
    initial_edge_weight: float = 1.0
    attention: bool = True
    p: float = 2.0
    m_dims: str = "full"  # "full" or an int literal
    step_beta: float = 1e-2
    max_iter: int = 500
    grad_tol: float = 1e-6
    reorth_every: int = 10
    lam: float = 0.1
    alpha: float = 2.0**-12
    gamma: float = 2.0**-12
    k_atoms: str = "half"  # "half" or an int literal
    max_outer: int = 50
    obj_tol: float = 1e-5
    inner_sweeps: int = 1
    seed: int = 0
    label_rate: float = 1.0
    train_fraction: float = 0.7


# config-file key -> (dataclass field, parser)
_BOOL = {"true": True, "false": False, "1": True, "0": False}


def _parse_bool(tok: str) -> bool:
    try:
        return _BOOL[tok.strip().lower()]
    except KeyError:
        raise InputError(f"expected a boolean, got {tok!r}") from None


def _parse_optional_int(tok: str) -> int | None:
    tok = tok.strip()
    return None if tok in ("", "none") else int(tok)


_CONFIG_KEYS = {
    "format": ("format", str),
    "normalize": ("normalize", _parse_bool),
    "center": ("center", _parse_bool),
    "k_neighbors": ("k_neighbors", _parse_optional_int),
    "bandwidth": ("bandwidth", str),
    "initial_edge_weight": ("initial_edge_weight", float),
    "attention": ("attention", _parse_bool),
    "p": ("p", float),
    "m_dims": ("m_dims", str),
    "step_beta": ("step_beta", float),
    "max_iter": ("max_iter", int),
    "grad_tol": ("grad_tol", float),
    "reorth_every": ("reorth_every", int),
    "lambda": ("lam", float),
    "alpha": ("alpha", float),
    "gamma": ("gamma", float),
    "k_atoms": ("k_atoms", str),
    "max_outer": ("max_outer", int),
    "obj_tol": ("obj_tol", float),
    "inner_sweeps": ("inner_sweeps", int),
    "seed": ("seed", int),
    "label_rate": ("label_rate", float),
    "train_fraction": ("train_fraction", float),
}


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    updates: dict = {}
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
            field_name, parser = _CONFIG_KEYS[key]
            try:
                updates[field_name] = parser(value)
            except (ValueError, InputError) as exc:
                raise InputError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return updates


def resolve_config(config_path, flag_updates: dict) -> RunConfig:
    cfg = RunConfig()
    if config_path:
        cfg = replace(cfg, **load_config_file(config_path))
    live = {k: v for k, v in flag_updates.items() if v is not None}
    return replace(cfg, **live)


def hyper_config(rc: RunConfig) -> hypergraph.HypergraphConfig:
    if rc.bandwidth == "median":
        mode, sigma = "median_pairwise", None
    else:
        try:
            sigma = float(rc.bandwidth)
        except ValueError:
            raise InputError(
                f"bandwidth must be 'median' or a number, got {rc.bandwidth!r}"
            ) from None
        mode = "fixed"
    return hypergraph.HypergraphConfig(
        k_neighbors=rc.k_neighbors,
        bandwidth_mode=mode,
        bandwidth=sigma,
        initial_edge_weight=rc.initial_edge_weight,
    )


def plap_config(rc: RunConfig) -> plap.PLapConfig:
    if rc.m_dims == "full":
        m = None
    else:
        try:
            m = int(rc.m_dims)
        except ValueError:
            raise InputError(
                f"m_dims must be 'full' or an integer, got {rc.m_dims!r}"
            ) from None
    return plap.PLapConfig(
        p=rc.p,
        m_dims=m,
        step_beta=rc.step_beta,
        max_iter=rc.max_iter,
        grad_tol=rc.grad_tol,
        reorthonormalize_every=rc.reorth_every,
    )


def prop_config(rc: RunConfig) -> pseudolabel.PropagationConfig:
    return pseudolabel.PropagationConfig(lam=rc.lam)


def train_config(rc: RunConfig) -> dictlearn.TrainConfig:
    if rc.k_atoms == "half":
        k = None
    else:
        try:
            k = int(rc.k_atoms)
        except ValueError:
            raise InputError(
                f"k_atoms must be 'half' or an integer, got {rc.k_atoms!r}"
            ) from None
    return dictlearn.TrainConfig(
        k_atoms=k,
        alpha=rc.alpha,
        gamma=rc.gamma,
        max_outer=rc.max_outer,
        obj_tol=rc.obj_tol,
        inner_sweeps=rc.inner_sweeps,
        seed=rc.seed,
    )


def write_metadata(out_prefix: str, rc: RunConfig, extra: dict | None = None) -> None:
    """key=value metadata: resolved config, environment, and run facts."""
    items: dict = {}
    for f in fields(rc):
        key = "lambda" if f.name == "lam" else f.name
        value = getattr(rc, f.name)
        items[key] = "" if value is None else value
    items["kernel_backend"] = _kernels.BACKEND
    items["ssdl_version"] = __version__
    items["numpy_version"] = np.__version__
    items["python_version"] = platform.python_version()
    items["threads"] = os.environ.get("OMP_NUM_THREADS", str(os.cpu_count()))
    if extra:
        items.update(extra)
    with Path(f"{out_prefix}.meta").open("w") as fh:
        for key in sorted(items):
            fh.write(f"{key}={items[key]}\n")


def _fail(kind: str, code: int, message: str) -> None:
    click.echo(f'ERROR kind={kind} code={code} msg="{message}"', err=True)
    sys.exit(code)


def cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            _fail("input", 2, str(exc))
        except NumericalError as exc:
            _fail("numerical", 3, str(exc))
        except InvariantViolation as exc:
            _fail("invariant", 4, str(exc))
        except FileNotFoundError as exc:
            _fail("input", 2, str(exc))

    return wrapper


def config_options(fn):
    opts = [
        click.option("--config", type=click.Path(), default=None, help="key=value config file"),
        click.option("--p", type=float, default=None, help="p-Laplacian exponent"),
        click.option("--lambda", "lam", type=float, default=None, help="propagation fidelity weight"),
        click.option("--alpha", type=float, default=None, help="code sparsity weight"),
        click.option("--gamma", type=float, default=None, help="label term weight"),
        click.option("--k-atoms", type=str, default=None, help="dictionary size, or 'half'"),
        click.option("--k-neighbors", type=int, default=None, help="neighbors per hyperedge centroid"),
        click.option("--label-rate", type=float, default=None, help="visible fraction of training labels"),
        click.option("--seed", type=int, default=None, help="run seed"),
        click.option("--format", "format_", type=click.Choice(["csv", "binary"]), default=None, help="feature file format"),
        click.option("--bandwidth", type=str, default=None, help="'median' or a fixed sigma"),
        click.option("--m-dims", type=str, default=None, help="embedding dimensions, or 'full'"),
        click.option("--max-outer", type=int, default=None, help="outer training iterations"),
        click.option("--obj-tol", type=float, default=None, help="relative objective stop"),
        click.option("--train-fraction", type=float, default=None, help="train split fraction"),
        click.option("--normalize/--no-normalize", default=None, help="per-sample l2 normalization"),
        click.option("--center/--no-center", default=None, help="subtract the global feature mean"),
        click.option("--attention/--plain-laplacian", default=None, help="attention regularizer, or force the plain Laplacian (zero attention)"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def gather_config(kwargs: dict) -> RunConfig:
    config_path = kwargs.pop("config", None)
    updates = {
        "p": kwargs.pop("p", None),
        "lam": kwargs.pop("lam", None),
        "alpha": kwargs.pop("alpha", None),
        "gamma": kwargs.pop("gamma", None),
        "k_atoms": kwargs.pop("k_atoms", None),
        "k_neighbors": kwargs.pop("k_neighbors", None),
        "label_rate": kwargs.pop("label_rate", None),
        "seed": kwargs.pop("seed", None),
        "format": kwargs.pop("format_", None),
        "bandwidth": kwargs.pop("bandwidth", None),
        "m_dims": kwargs.pop("m_dims", None),
        "max_outer": kwargs.pop("max_outer", None),
        "obj_tol": kwargs.pop("obj_tol", None),
        "train_fraction": kwargs.pop("train_fraction", None),
        "normalize": kwargs.pop("normalize", None),
        "center": kwargs.pop("center", None),
        "attention": kwargs.pop("attention", None),
    }
    if kwargs:
        raise InputError(f"unhandled options: {sorted(kwargs)}")
    return resolve_config(config_path, updates)


def _load_features(path: str, rc: RunConfig) -> matrixio.FeatureMatrix:
    fm = matrixio.load_features(path, format=rc.format)
    return pipeline.preprocess_features(fm, center=rc.center, normalize=rc.normalize)


def _load_labels(path: str, classes: int | None, n: int) -> matrixio.PartialLabels:
    if classes is None:
        peek = matrixio.load_labels(path, num_classes=2**31 - 1)
        classes = int(peek.labels.max()) + 1
        if classes < 2:
            raise InputError(
                f"cannot infer class count from {path}; pass --classes"
            )
    labels = matrixio.load_labels(path, classes)
    if labels.n_samples != n:
        raise InputError(
            f"{path}: {labels.n_samples} labels for {n} feature columns"
        )
    return labels


def _load_indices(path: str, n: int) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise InputError(f"index file not found: {p}")
    idx = []
    with p.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                idx.append(int(tok))
            except ValueError:
                raise InputError(f"{p}: non-integer index at line {lineno}") from None
    arr = np.asarray(idx, dtype=np.int64)
    if arr.size == 0:
        raise InputError(f"{p}: empty index file")
    if arr.min() < 0 or arr.max() >= n:
        raise InputError(f"{p}: index outside [0, {n})")
    return arr


def _write_indices(path, idx: np.ndarray) -> None:
    with Path(path).open("w") as fh:
        for v in idx:
            fh.write(f"{int(v)}\n")


@click.group()
@click.version_option(version=__version__, prog_name="ssdl")
def main():
    """Semi-supervised dictionary learning with hypergraph pseudo-labels."""


@main.command()
@click.option("--classes", type=int, required=True)
@click.option("--per-class", type=int, required=True)
@click.option("--dim", type=int, required=True)
@click.option("--spread", type=float, required=True)
@click.option("--out", "-o", required=True, help="output path prefix")
@config_options
@cli_errors
def synth(classes, per_class, dim, spread, out, **kwargs):
    """Generate a Gaussian-blob dataset plus split and visibility files."""
    rc = gather_config(kwargs)
    spec = matrixio.SyntheticSpec(
        num_classes=classes,
        samples_per_class=per_class,
        dim=dim,
        cluster_spread=spread,
        seed=rc.seed,
    )
    fm, truth = matrixio.make_synthetic(spec)
    ext = "csv" if rc.format == "csv" else "bin"
    matrixio.save_features(f"{out}.features.{ext}", fm, format=rc.format)
    matrixio.save_labels(f"{out}.labels.txt", truth)

    train_idx, test_idx = pipeline.split_stratified(truth, rc.train_fraction, rc.seed)
    visible = pipeline.visible_training_labels(
        truth, train_idx, rc.label_rate, rc.seed
    )
    matrixio.save_labels(f"{out}.visible.txt", visible)
    _write_indices(f"{out}.train_idx.txt", train_idx)
    _write_indices(f"{out}.test_idx.txt", test_idx)
    write_metadata(out, rc, {"n": fm.n_samples, "dim": fm.dim, "classes": classes})
    click.echo(f"wrote {out}.features.{ext} ({fm.dim}x{fm.n_samples})")


@main.command(name="pseudolabel")
@click.option("--features", required=True, type=click.Path())
@click.option("--labels", required=True, type=click.Path(), help="visible labels (-1 = unlabeled)")
@click.option("--classes", type=int, default=None, help="class count (inferred when omitted)")
@click.option("--truth", type=click.Path(), default=None, help="full labels for held-out cross-entropy")
@click.option("--out", "-o", required=True, help="output path prefix")
@click.option("--diagnostics", is_flag=True, help="write the embedding iteration log")
@config_options
@cli_errors
def pseudolabel_cmd(features, labels, classes, truth, out, diagnostics, **kwargs):
    """Hypergraph -> p-Laplacian attention -> propagated soft labels."""
    rc = gather_config(kwargs)
    fm = _load_features(features, rc)
    visible = _load_labels(labels, classes, fm.n_samples)
    diag: list | None = [] if diagnostics else None

    f, info = pipeline.generate_pseudolabels(
        fm,
        visible,
        hyper_config(rc),
        plap_config(rc),
        prop_config(rc),
        use_attention=rc.attention,
        diagnostics=diag,
    )
    pseudolabel.save_pseudolabels(f"{out}.pseudolabels.csv", f)
    extra = {"sigma": "%.17g" % info["sigma"], "n": fm.n_samples, "dim": fm.dim}
    if "eigenvalues" in info:
        with Path(f"{out}.lambda.csv").open("w") as fh:
            for v in info["eigenvalues"]:
                fh.write("%.17g\n" % v)
        emb = info["embedding"]
        extra["embedding_converged"] = emb["converged"]
        extra["embedding_iterations"] = emb["iterations"]
        extra["embedding_objective"] = "%.17g" % emb["objective"]
    if diag is not None:
        with Path(f"{out}.embedding_log.csv").open("w") as fh:
            fh.write("iteration,f1,orthogonality_drift,beta\n")
            for row in diag:
                fh.write("%d,%.17g,%.17g,%.17g\n" % row)
    if truth is not None:
        truth_labels = _load_labels(truth, visible.num_classes, fm.n_samples)
        ce = pseudolabel.propagation_cross_entropy(
            f, truth_labels, mask="heldout_only", visible=visible
        )
        extra["cross_entropy"] = "%.17g" % ce
        click.echo(f"cross_entropy={ce:.6f}")
    write_metadata(out, rc, extra)
    click.echo(f"wrote {out}.pseudolabels.csv")


@main.command()
@click.option("--features", required=True, type=click.Path())
@click.option("--pseudolabels", type=click.Path(), default=None, help="propagated label CSV")
@click.option("--labels", type=click.Path(), default=None, help="partial labels; trains on the initial embedding directly")
@click.option("--classes", type=int, default=None)
@click.option("--columns", type=click.Path(), default=None, help="train on these feature columns only")
@click.option(
    "--scale-supervision/--raw-supervision",
    default=True,
    help="range-scale pseudo-label columns to [0, 1] before training",
)
@click.option("--out", "-o", required=True, help="output path prefix")
@config_options
@cli_errors
def train(features, pseudolabels, labels, classes, columns, scale_supervision, out, **kwargs):
    """Train the dictionary and classifier from soft (or initial) labels."""
    rc = gather_config(kwargs)
    fm = _load_features(features, rc)
    if (pseudolabels is None) == (labels is None):
        raise InputError("pass exactly one of --pseudolabels or --labels")
    if pseudolabels is not None:
        f = pseudolabel.load_pseudolabels(pseudolabels)
        if f.n_samples != fm.n_samples:
            raise InputError(
                f"{f.n_samples} pseudo-label columns for {fm.n_samples} samples"
            )
        values = pipeline.scale_supervision(f.values) if scale_supervision else f.values
    else:
        partial = _load_labels(labels, classes, fm.n_samples)
        values = pseudolabel.build_initial_labels(partial).values

    data = fm.data
    if columns is not None:
        idx = _load_indices(columns, fm.n_samples)
        data = data[:, idx]
        values = values[:, idx]

    model, trace = dictlearn.train(data, values, train_config(rc))
    matrixio.save_model(f"{out}.model.bin", model)
    trace.save_csv(f"{out}.trace.csv")
    write_metadata(
        out,
        rc,
        {
            "n_train": data.shape[1],
            "dim": data.shape[0],
            "k_atoms_resolved": model.n_atoms,
            "scale_supervision": scale_supervision and pseudolabels is not None,
            "final_objective": "%.17g" % trace.total[-1],
        },
    )
    click.echo(f"wrote {out}.model.bin (K={model.n_atoms})")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--features", required=True, type=click.Path())
@click.option("--columns", type=click.Path(), default=None)
@click.option("--out", "-o", required=True, help="output path prefix")
@config_options
@cli_errors
def predict(model_path, features, columns, out, **kwargs):
    """Encode samples against the dictionary and write class scores."""
    rc = gather_config(kwargs)
    model = matrixio.load_model(model_path)
    fm = _load_features(features, rc)
    data, ids = fm.data, fm.sample_ids
    if columns is not None:
        idx = _load_indices(columns, fm.n_samples)
        data = data[:, idx]
        ids = [ids[i] for i in idx]
    pred = classify.predict(model, data, rc.alpha)
    classify.save_predictions(f"{out}.predictions.csv", pred, ids)
    write_metadata(out, rc, {"n_predicted": data.shape[1]})
    click.echo(f"wrote {out}.predictions.csv")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--features", required=True, type=click.Path())
@click.option("--truth", required=True, type=click.Path())
@click.option("--classes", type=int, default=None)
@click.option("--columns", type=click.Path(), default=None)
@click.option("--out", "-o", default=None, help="optional output path prefix")
@config_options
@cli_errors
def evaluate(model_path, features, truth, classes, columns, out, **kwargs):
    """Predict and score accuracy against ground-truth labels."""
    rc = gather_config(kwargs)
    model = matrixio.load_model(model_path)
    fm = _load_features(features, rc)
    truth_labels = _load_labels(truth, classes, fm.n_samples)
    data = fm.data
    labels = truth_labels
    if columns is not None:
        idx = _load_indices(columns, fm.n_samples)
        data = data[:, idx]
        labels = matrixio.PartialLabels(
            truth_labels.labels[idx], truth_labels.num_classes
        )
    pred = classify.predict(model, data, rc.alpha)
    acc = classify.accuracy(pred, labels)
    n_eval = int(np.sum(labels.labels >= 0))
    line = f"accuracy={acc:.6f} n={n_eval}"
    click.echo(line)
    if out:
        with Path(f"{out}.metrics.txt").open("w") as fh:
            fh.write(line + "\n")
        write_metadata(out, rc, {"accuracy": "%.17g" % acc, "n_evaluated": n_eval})


def _parse_grid(grid: str) -> list[float]:
    values = []
    for tok in grid.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "^" in tok:
            base, exp = tok.split("^", 1)
            values.append(float(base) ** float(exp))
        else:
            values.append(float(tok))
    if not values:
        raise InputError("empty sweep grid")
    return values


@main.command()
@click.option("--kind", type=click.Choice(["label_rate", "p", "lambda", "alpha_gamma"]), required=True)
@click.option("--grid", required=True, help="comma-separated values; 2^-12 notation allowed")
@click.option("--grid2", default=None, help="gamma grid for alpha_gamma (defaults to --grid)")
@click.option("--features", required=True, type=click.Path())
@click.option("--labels", required=True, type=click.Path(), help="full ground-truth labels")
@click.option("--classes", type=int, default=None)
@click.option("--out", "-o", required=True, help="output path prefix")
@config_options
@cli_errors
def sweep(kind, grid, grid2, features, labels, classes, out, **kwargs):
    """Grid runs of the full pipeline; one CSV row per grid point.

    label_rate and alpha_gamma report held-out accuracy; p and lambda
    report held-out pseudo-label cross-entropy.
    """
    rc = gather_config(kwargs)
    fm = matrixio.load_features(features, format=rc.format)  # raw: run_scenario preprocesses
    truth = _load_labels(labels, classes, fm.n_samples)
    values = _parse_grid(grid)

    def scenario(rc_cell: RunConfig) -> pipeline.ScenarioConfig:
        return pipeline.ScenarioConfig(
            train_fraction=rc_cell.train_fraction,
            label_rate=rc_cell.label_rate,
            seed=rc_cell.seed,
            center=rc_cell.center,
            normalize=rc_cell.normalize,
            use_attention=rc_cell.attention,
            hyper=hyper_config(rc_cell),
            embed=plap_config(rc_cell),
            prop=prop_config(rc_cell),
            train=train_config(rc_cell),
        )

    rows: list[str] = []
    if kind == "alpha_gamma":
        gammas = _parse_grid(grid2) if grid2 else list(values)
        header = "alpha,gamma,accuracy,status"
        # Propagation does not depend on alpha/gamma: reuse one run of it.
        base = scenario(rc)
        fmp = pipeline.preprocess_features(fm, center=rc.center, normalize=rc.normalize)
        train_idx, test_idx = pipeline.split_stratified(
            truth, rc.train_fraction, rc.seed
        )
        visible = pipeline.visible_training_labels(
            truth, train_idx, rc.label_rate, rc.seed
        )
        f, _ = pipeline.generate_pseudolabels(
            fmp, visible, base.hyper, base.embed, base.prop, rc.attention
        )
        supervision = pipeline.scale_supervision(f.values[:, train_idx])
        x_train = fmp.data[:, train_idx]
        test_truth = matrixio.PartialLabels(
            truth.labels[test_idx], truth.num_classes
        )
        for a in values:
            for g in gammas:
                try:
                    tc = train_config(replace(rc, alpha=a, gamma=g))
                    model, _ = dictlearn.train(x_train, supervision, tc)
                    pred = classify.predict(model, fmp.data[:, test_idx], a)
                    acc = classify.accuracy(pred, test_truth)
                    rows.append("%.17g,%.17g,%.6f,ok" % (a, g, acc))
                except (InputError, NumericalError, InvariantViolation) as exc:
                    rows.append(
                        "%.17g,%.17g,,error:%s" % (a, g, type(exc).__name__)
                    )
    else:
        header = {
            "label_rate": "label_rate,accuracy,status",
            "p": "p,cross_entropy,status",
            "lambda": "lambda,cross_entropy,status",
        }[kind]
        for v in values:
            rc_cell = {
                "label_rate": lambda: replace(rc, label_rate=v),
                "p": lambda: replace(rc, p=v),
                "lambda": lambda: replace(rc, lam=v),
            }[kind]()
            try:
                result = pipeline.run_scenario(fm, truth, scenario(rc_cell))
                metric = (
                    result.accuracy if kind == "label_rate" else result.cross_entropy
                )
                rows.append("%.17g,%.6f,ok" % (v, metric))
            except (InputError, NumericalError, InvariantViolation) as exc:
                rows.append("%.17g,,error:%s" % (v, type(exc).__name__))

    with Path(f"{out}.sweep.csv").open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
    write_metadata(out, rc, {"kind": kind, "cells": len(rows)})
    click.echo(f"wrote {out}.sweep.csv ({len(rows)} rows)")


if __name__ == "__main__":
    main()
