"""Optional numba acceleration.

Set ``FLOQUET4_NO_NUMBA=1`` to force the pure-numpy code paths (useful for
debugging and for the benchmark comparing both).
"""

import os

_flag = os.environ.get("FLOQUET4_NO_NUMBA", "").strip().lower()
FORCED_OFF = _flag not in ("", "0", "false", "no")

try:
    if FORCED_OFF:
        raise ImportError("numba disabled by FLOQUET4_NO_NUMBA")
    import numba as _nb

    HAVE_NUMBA = True
except ImportError:
    _nb = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
