"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set SSDL_PURE_PYTHON=1 to force the fallback regardless of what is
installed. The active backend name is recorded in run metadata because the
two backends differ in floating-point summation order.
"""

import os

from . import _kernels_py

if os.environ.get("SSDL_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
cd_sweep = _impl.cd_sweep
cd_objective = _impl.cd_objective
plap_gradient = _impl.plap_gradient
plap_quotients = _impl.plap_quotients
