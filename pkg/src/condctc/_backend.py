"""JIT backend selection for the hot dynamic-programming kernels.

The default backend compiles kernels with numba's ``@njit``. Setting the
environment variable ``CONDCTC_BACKEND=numpy`` (before import) selects the
pure-numpy/python fallback: the same kernel source runs undecorated. The
fallback is slower but dependency-free beyond numpy; results agree with the
jitted path to floating-point noise.
"""

from __future__ import annotations

import os

BACKEND = os.environ.get("CONDCTC_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ValueError(
        f"CONDCTC_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}"
    )

if BACKEND == "numba":
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        BACKEND = "numpy"

if BACKEND == "numpy":

    def njit(*args, **kwargs):
        """No-op stand-in for numba.njit: returns the function unchanged."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
