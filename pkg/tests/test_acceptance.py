"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines live.
The pinned pipeline scenario: 3 classes, 40 samples/class, dim 10, spread
0.3, seed 42, 70/30 split, 40% label rate, lambda=0.1, p=2.2,
alpha=gamma=2^-12, K = N_train/2, centered + l2-normalized features.
"""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from ssdl.cli import main
from ssdl.dictlearn import DictionaryModel, TrainConfig, train, update_codes
from ssdl.hypergraph import HypergraphConfig
from ssdl.matrixio import SyntheticSpec, make_synthetic
from ssdl.pipeline import ScenarioConfig, run_scenario, split_stratified
from ssdl.plap import EdgeGraph, PLapConfig, plap_embedding
from ssdl.pseudolabel import LabelMatrix, PropagationConfig, propagate

ALPHA = 2.0**-12
LOG3 = float(np.log(3.0))


def _report(num, name, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num} {name}: {status} ({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")
    assert ok, f"criterion {num} ({name}): {detail}"
    assert elapsed < budget, f"criterion {num} exceeded its {budget:.0f}s budget"


def scenario_config(seed=42, label_rate=0.4, supervision="pseudo", alpha=ALPHA, gamma=ALPHA):
    return ScenarioConfig(
        train_fraction=0.7,
        label_rate=label_rate,
        seed=seed,
        supervision=supervision,
        hyper=HypergraphConfig(),
        embed=PLapConfig(p=2.2),
        prop=PropagationConfig(lam=0.1),
        train=TrainConfig(alpha=alpha, gamma=gamma, seed=seed),
    )


@pytest.fixture(scope="module")
def blobs():
    return make_synthetic(SyntheticSpec(3, 40, 10, 0.3, seed=42))


def test_criterion_1_soft_threshold_oracle():
    start = time.time()
    rng = np.random.default_rng(2024)
    grid = np.arange(-10.0, 10.0 + 1e-4, 1e-4)
    abs_grid = np.abs(grid)
    sq_grid = grid * grid
    worst = 0.0
    for _ in range(1000):
        a = rng.uniform(1.0, 4.0)
        j = rng.uniform(-9.0, 9.0)
        alpha = rng.uniform(0.0, 2.0)
        model = DictionaryModel(
            np.array([[np.sqrt(a)]]), np.array([[0.0]]), np.zeros((1, 1))
        )
        cfg = TrainConfig(k_atoms=1, alpha=alpha, gamma=0.0)
        s = update_codes(model, np.array([[j / np.sqrt(a)]]), np.array([[0.0]]), cfg)[0, 0]
        s_grid = grid[np.argmin(a * sq_grid - 2.0 * j * grid + 2.0 * alpha * abs_grid)]
        worst = max(worst, abs(s - s_grid))
    elapsed = time.time() - start
    _report(1, "soft-threshold oracle", worst <= 1e-3, f"worst |cd-grid|={worst:.2e}", elapsed, 5.0)


def test_criterion_2_objective_monotonicity():
    start = time.time()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(2, 9))
        n = int(rng.integers(4, 41))
        k = int(rng.integers(1, min(21, n + 1)))
        c = int(rng.integers(2, 5))
        x = rng.standard_normal((dim, n))
        f = rng.random((c, n))
        cfg = TrainConfig(
            k_atoms=k,
            alpha=float(2.0 ** rng.uniform(-14, -6)),
            gamma=float(2.0 ** rng.uniform(-14, -6)),
            seed=int(rng.integers(0, 1000)),
        )
        _, trace = train(x, f, cfg)
        rises = [b - a for a, b in zip(trace.total, trace.total[1:]) if b > a]
        if rises:
            worst = max(worst, max(rises))
    elapsed = time.time() - start
    _report(2, "objective monotonicity", worst <= 1e-9, f"worst rise={worst:.2e}", elapsed, 30.0)


def test_criterion_3_p2_reduction():
    start = time.time()
    rng = np.random.default_rng(11)
    worst_f1, worst_lam = 0.0, 0.0
    for trial in range(10):
        n = int(rng.integers(2, 21))
        w = rng.random((n, n)) * (rng.random((n, n)) < rng.uniform(0.2, 0.9))
        w = (w + w.T) / 2.0
        np.fill_diagonal(w, 0.0)
        w *= 10.0 ** rng.integers(-1, 3)
        m = n if trial % 2 == 0 else max(1, n // 2)

        emb = plap_embedding(EdgeGraph(w), PLapConfig(p=2.0, m_dims=m))

        lap = np.diag(w.sum(axis=1)) - w
        _, vecs = np.linalg.eigh(lap)
        oracle = np.empty(m)
        for i in range(m):
            col = vecs[:, i]
            diffs = np.abs(col[:, None] - col[None, :])
            oracle[i] = np.sum(w * diffs**2) / np.sum(col**2)
        worst_f1 = max(worst_f1, abs(emb.objective - oracle.sum()))
        worst_lam = max(worst_lam, float(np.max(np.abs(emb.eigenvalues - oracle))))
    elapsed = time.time() - start
    ok = worst_f1 <= 1e-3 and worst_lam <= 1e-4
    _report(3, "p=2 reduction", ok, f"|f1-opt|={worst_f1:.2e}, |lam-quot|={worst_lam:.2e}", elapsed, 10.0)


def test_criterion_4_propagation_stationarity():
    start = time.time()
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 31))
        c = int(rng.integers(2, 6))
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        delta = (q * rng.uniform(0.0, 2.0, size=n)) @ q.T
        delta = (delta + delta.T) / 2.0
        o = rng.random((c, n))
        lam = float(rng.uniform(0.05, 1.0))
        f = propagate(LabelMatrix(o, "initial_O"), delta, PropagationConfig(lam=lam))
        grad = 2.0 * f.values @ delta + 2.0 * lam * (f.values - o)
        worst = max(worst, float(np.max(np.abs(grad)) / np.max(np.abs(o))))
    elapsed = time.time() - start
    _report(4, "propagation stationarity", worst <= 1e-8, f"worst grad ratio={worst:.2e}", elapsed, 5.0)


def _run_cli_scenario(root):
    """The criterion-5 scenario driven end to end through the CLI."""
    runner = CliRunner()
    data = root / "data"
    flags = ["--normalize", "--center", "--seed", "42"]
    steps = [
        ["synth", "--classes", "3", "--per-class", "40", "--dim", "10",
         "--spread", "0.3", "--label-rate", "0.4", "--train-fraction", "0.7",
         "-o", str(data)] + flags,
        ["pseudolabel", "--features", f"{data}.features.csv",
         "--labels", f"{data}.visible.txt", "--truth", f"{data}.labels.txt",
         "--p", "2.2", "--lambda", "0.1", "-o", str(root / "pl")] + flags,
        ["train", "--features", f"{data}.features.csv",
         "--pseudolabels", f"{root / 'pl'}.pseudolabels.csv",
         "--columns", f"{data}.train_idx.txt",
         "--alpha", "0.000244140625", "--gamma", "0.000244140625",
         "--k-atoms", "half", "-o", str(root / "model")] + flags,
        ["predict", "--model", f"{root / 'model'}.model.bin",
         "--features", f"{data}.features.csv",
         "--columns", f"{data}.test_idx.txt",
         "--alpha", "0.000244140625", "-o", str(root / "pred")] + flags,
        ["evaluate", "--model", f"{root / 'model'}.model.bin",
         "--features", f"{data}.features.csv", "--truth", f"{data}.labels.txt",
         "--columns", f"{data}.test_idx.txt",
         "--alpha", "0.000244140625", "-o", str(root / "eval")] + flags,
    ]
    outputs = []
    for step in steps:
        res = runner.invoke(main, step)
        assert res.exit_code == 0, f"{step[0]} failed: {res.output}"
        outputs.append(res.output)
    return outputs


def _nearest_centroid_accuracy(fm, truth, visible, train_idx, test_idx):
    """Independent baseline: centroids of the visibly labeled training
    samples on the raw features."""
    cents = np.stack(
        [
            fm.data[:, train_idx][:, visible.labels[train_idx] == c].mean(axis=1)
            for c in range(truth.num_classes)
        ],
        axis=1,
    )
    d2 = ((fm.data[:, test_idx][:, :, None] - cents[:, None, :]) ** 2).sum(axis=0)
    return float(np.mean(np.argmin(d2, axis=1) == truth.labels[test_idx]))


@pytest.fixture(scope="module")
def cli_run_one(tmp_path_factory):
    root = tmp_path_factory.mktemp("run1")
    start = time.time()
    outputs = _run_cli_scenario(root)
    return root, outputs, time.time() - start


def test_criterion_5_pipeline_regression(blobs, cli_run_one):
    root, outputs, run_elapsed = cli_run_one
    start = time.time() - run_elapsed
    acc = float(outputs[-1].split("accuracy=")[1].split()[0])
    ce = float(outputs[1].split("cross_entropy=")[1].split()[0])

    fm, truth = blobs
    from ssdl.matrixio import load_labels

    visible = load_labels(f"{root / 'data'}.visible.txt", 3)
    train_idx, test_idx = split_stratified(truth, 0.7, 42)
    nc = _nearest_centroid_accuracy(fm, truth, visible, train_idx, test_idx)

    ok = acc >= 0.90 and acc >= nc - 0.02 and ce < LOG3
    elapsed = time.time() - start
    _report(
        5,
        "pipeline regression",
        ok,
        f"acc={acc:.4f} (floor max(0.90, NC-2pts={nc - 0.02:.4f})), ce={ce:.4f} < log3={LOG3:.4f}",
        elapsed,
        60.0,
    )


def test_criterion_6_label_rate_robustness(blobs):
    start = time.time()
    fm, truth = blobs
    acc_full = run_scenario(fm, truth, scenario_config(seed=42, label_rate=1.0)).accuracy
    acc_low = run_scenario(fm, truth, scenario_config(seed=42, label_rate=0.2)).accuracy

    margins = []
    for seed in (101, 102, 103, 104, 105):
        ssdl_acc = run_scenario(fm, truth, scenario_config(seed=seed, label_rate=0.2)).accuracy
        base_acc = run_scenario(
            fm, truth, scenario_config(seed=seed, label_rate=0.2, supervision="initial")
        ).accuracy
        margins.append(ssdl_acc - base_acc)
    mean_margin = float(np.mean(margins))

    ok = (acc_full - acc_low) <= 0.10 and mean_margin >= 0.0
    elapsed = time.time() - start
    _report(
        6,
        "label-rate robustness",
        ok,
        f"acc@100%={acc_full:.4f}, acc@20%={acc_low:.4f}, mean margin vs O-baseline={mean_margin:+.4f}",
        elapsed,
        300.0,
    )


def test_criterion_7_parameter_insensitivity(blobs):
    start = time.time()
    fm, truth = blobs
    accs = []
    for a in (2.0**-14, 2.0**-12, 2.0**-10):
        for g in (2.0**-14, 2.0**-12, 2.0**-10):
            accs.append(
                run_scenario(fm, truth, scenario_config(seed=42, alpha=a, gamma=g)).accuracy
            )
    spread = max(accs) - min(accs)
    elapsed = time.time() - start
    _report(
        7,
        "parameter insensitivity",
        spread <= 0.05,
        f"9-cell accuracy spread={100 * spread:.2f} points",
        elapsed,
        300.0,
    )


def test_criterion_8_determinism(cli_run_one, tmp_path_factory):
    start = time.time()
    root1, _, _ = cli_run_one
    root2 = tmp_path_factory.mktemp("run2")
    _run_cli_scenario(root2)

    artifacts = [
        "data.features.csv", "data.labels.txt", "data.visible.txt",
        "data.train_idx.txt", "data.test_idx.txt", "data.meta",
        "pl.pseudolabels.csv", "pl.lambda.csv", "pl.meta",
        "model.model.bin", "model.trace.csv", "model.meta",
        "pred.predictions.csv", "pred.meta",
        "eval.metrics.txt", "eval.meta",
    ]
    diffs = [
        name
        for name in artifacts
        if (root1 / name).read_bytes() != (root2 / name).read_bytes()
    ]
    elapsed = time.time() - start
    _report(
        8,
        "determinism",
        not diffs,
        "byte-identical" if not diffs else f"differs: {diffs}",
        elapsed,
        120.0,
    )
