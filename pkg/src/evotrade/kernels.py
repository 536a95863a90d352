"""Kernel backend selection.

Imports the compiled extension when it is available, otherwise falls back to
the numpy reference implementations. Set EVOTRADE_KERNELS=python to force
the fallback (used by the parity tests and the benchmark).
"""
from __future__ import annotations

import os

if os.environ.get("EVOTRADE_KERNELS", "").lower() == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
N_PARAMS = _impl.N_PARAMS
N_IN = _impl.N_IN
N_OUT = _impl.N_OUT

nn_forward = _impl.nn_forward
find_clearing = _impl.find_clearing
knn_select = _impl.knn_select
