"""Kernel backend selection.

The env var ``CSTUNE_BACKEND`` picks the implementation of the hot
elementwise kernels:

* ``numba`` — jit-compiled loops (default when numba imports cleanly)
* ``numpy`` — pure-numpy fallback, always available

Both expose the same functions and agree to ~1 ulp; per-backend results
are bit-deterministic for a fixed seed. ``benchmarks/bench_backends.py``
compares their throughput.
"""

from __future__ import annotations

import os
import warnings

from . import _kernels_numpy

_ENV_VAR = "CSTUNE_BACKEND"


def _load(choice: str):
    if choice == "numpy":
        return _kernels_numpy
    if choice == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if choice == "auto":
        try:
            from . import _kernels_numba

            return _kernels_numba
        except ImportError:
            warnings.warn("numba unavailable, falling back to numpy kernels")
            return _kernels_numpy
    raise ValueError(f"{_ENV_VAR} must be 'numba', 'numpy' or 'auto', got {choice!r}")


kernels = _load(os.environ.get(_ENV_VAR, "auto").lower())

ACTIVE = kernels.NAME
