"""Compiled vs pure-NumPy kernel equivalence."""

import os
import subprocess
import sys

import numpy as np
import pytest

from ssdl import _kernels_py

_kernels_c = pytest.importorskip(
    "ssdl._kernels_c", reason="compiled kernels not built"
)


def random_cd_instance(seed, k=9, n=14, dim=6):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((dim, k))
    gram = np.ascontiguousarray(d.T @ d + 0.3 * np.eye(k))
    target = np.ascontiguousarray(rng.standard_normal((k, n)))
    return gram, target


@pytest.mark.parametrize("sweeps", [1, 5])
@pytest.mark.parametrize("alpha", [0.0, 0.05, 1.0])
def test_cd_sweep_equivalence(alpha, sweeps):
    gram, target = random_cd_instance(0)
    s_py = np.zeros_like(target)
    s_c = np.zeros_like(target)
    _kernels_py.cd_sweep(gram, target, s_py, alpha, sweeps)
    _kernels_c.cd_sweep(gram, target, s_c, alpha, sweeps)
    np.testing.assert_allclose(s_c, s_py, rtol=1e-10, atol=1e-12)


def test_cd_objective_equivalence():
    gram, target = random_cd_instance(1)
    rng = np.random.default_rng(2)
    codes = np.ascontiguousarray(rng.standard_normal(target.shape))
    v_py = _kernels_py.cd_objective(gram, target, codes, 0.1, const=3.5)
    v_c = _kernels_c.cd_objective(gram, target, codes, 0.1, const=3.5)
    assert v_c == pytest.approx(v_py, rel=1e-12)


@pytest.mark.parametrize("p", [1.2, 2.0, 2.7])
def test_plap_gradient_equivalence(p):
    rng = np.random.default_rng(3)
    n, m = 12, 7
    w = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
    w = np.ascontiguousarray((w + w.T) / 2.0)
    np.fill_diagonal(w, 0.0)
    qt = np.ascontiguousarray(np.linalg.qr(rng.standard_normal((n, m)))[0].T)

    g_py, num_py, den_py = _kernels_py.plap_gradient(w, qt, p)
    g_c, num_c, den_c = _kernels_c.plap_gradient(w, qt, p)
    np.testing.assert_allclose(g_c, g_py, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(num_c, num_py, rtol=1e-11)
    np.testing.assert_allclose(den_c, den_py, rtol=1e-12)

    n_py, d_py = _kernels_py.plap_quotients(w, qt, p)
    n_c, d_c = _kernels_c.plap_quotients(w, qt, p)
    np.testing.assert_allclose(n_c, n_py, rtol=1e-11)
    np.testing.assert_allclose(d_c, d_py, rtol=1e-12)


def test_backend_dispatch_env_override():
    code = "import ssdl; print(ssdl.kernel_backend)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"SSDL_PURE_PYTHON": "1", "PYTHONPATH": "src", "PATH": "/usr/bin:/bin"},
        check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.skipif(
    bool(os.environ.get("SSDL_PURE_PYTHON")), reason="fallback forced via env"
)
def test_backend_is_compiled_here():
    from ssdl import _kernels

    assert _kernels.BACKEND == "compiled"
