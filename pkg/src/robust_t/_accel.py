"""Backend selection for the hot kernels.

``ROBUST_T_BACKEND=numpy`` forces the pure-numpy path; anything else (or
unset) uses numba when it imports cleanly.
"""

import os

_requested = os.environ.get("ROBUST_T_BACKEND", "numba").strip().lower()

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


if _requested not in ("numba", "numpy"):
    raise ImportError(
        f"ROBUST_T_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"

__all__ = ["BACKEND", "HAVE_NUMBA", "njit"]
