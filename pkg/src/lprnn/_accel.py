"""Backend switch for the hot kernels.

Set ``LPRNN_DISABLE_NUMBA=1`` to force the pure-numpy implementations.
Both backends produce bit-identical results (checked in the test suite).
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("LPRNN_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

# fastmath stays off: it would allow FMA contraction and reassociation, which
# breaks bit-equality with the numpy path.
NJIT_OPTIONS = dict(cache=True, nogil=True, fastmath=False, error_model="numpy")


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as-is."""
    if not NUMBA_AVAILABLE:
        return func
    return numba.njit(**NJIT_OPTIONS)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
