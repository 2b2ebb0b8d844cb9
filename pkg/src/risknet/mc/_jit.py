"""Select numba or plain-Python execution of the simulation kernels.

``RISKNET_DISABLE_NUMBA=1`` runs the undecorated kernels in the interpreter;
``RISKNET_THREADS`` caps the numba thread pool.
"""
from __future__ import annotations

import os

USE_NUMBA = os.environ.get("RISKNET_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    import numba

    numba.config.THREADING_LAYER = os.environ.get("NUMBA_THREADING_LAYER", "workqueue")

    def jit(fn):
        return numba.njit(cache=True)(fn)

    def pjit(fn):
        return numba.njit(cache=True, parallel=True)(fn)

    prange = numba.prange
    _threads = os.environ.get("RISKNET_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
else:
    def jit(fn):
        return fn

    pjit = jit
    prange = range
