"""Backend selection for the hot numerical kernels.

Every performance-critical loop in the package exists twice: a scalar-loop
kernel compiled with numba and a vectorised pure-numpy twin.  The
``SGPROC_BACKEND`` environment variable picks which one the public functions
dispatch to:

``numba`` (default when numba is importable)
    compiled kernels, cached on disk after the first call.
``numpy``
    vectorised numpy code only; numba is never asked to compile anything.

The variable is read once at import time.  Tests that compare the two paths
call the ``*_nb`` and ``*_np`` kernels directly instead of flipping the flag.
"""
from __future__ import annotations

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None

_requested = os.environ.get("SGPROC_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(
        f"SGPROC_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

#: Name of the active backend, either ``"numba"`` or ``"numpy"``.
BACKEND = "numba" if (HAVE_NUMBA and _requested == "numba") else "numpy"
USE_NUMBA = BACKEND == "numba"


def njit(*args, **kwd):
    """Compile with ``numba.njit`` when numba is installed.

    Without numba the decorated function is returned unchanged, so the kernel
    still runs (slowly) as plain Python.  ``cache=True`` is the default;
    ``fastmath`` is deliberately left off because the log-domain sums rely on
    IEEE semantics for infinities.
    """
    kwd.setdefault("cache", True)
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwd:
            return args[0]
        return lambda f: f
    if len(args) == 1 and callable(args[0]):
        return _numba.njit(cache=kwd.pop("cache"), **kwd)(args[0])
    return _numba.njit(*args, **kwd)
