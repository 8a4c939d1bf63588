"""JIT switch.

Kernels are written once as plain Python over numpy arrays.  When numba is
importable and ``PLANAR_RICCATI_DISABLE_JIT`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the same source runs interpreted.
"""

from __future__ import annotations

import os

_flag = os.environ.get("PLANAR_RICCATI_DISABLE_JIT", "0").strip().lower()
JIT_REQUESTED = _flag in ("", "0", "false", "no")

try:  # pragma: no cover - depends on environment
    if not JIT_REQUESTED:
        raise ImportError("disabled by environment")
    import numba as _numba

    JIT_ENABLED = True
except ImportError:  # pragma: no cover
    _numba = None
    JIT_ENABLED = False


def njit(fn):
    """Compile ``fn`` with numba when enabled, else return it unchanged."""
    if JIT_ENABLED:
        return _numba.njit(cache=True, nogil=True)(fn)
    return fn


def backend_name() -> str:
    return "numba" if JIT_ENABLED else "python"
