"""Kernel dispatch: compiled Cython core when available, numpy fallback otherwise.

Set ``ROBOSHIM_PURE_PY=1`` to force the fallback (useful for debugging and for
the cross-implementation equivalence tests).  Both lanes produce bit-identical
results; the compiled one is just faster.
"""

import os

from . import _purepy

if os.environ.get("ROBOSHIM_PURE_PY", "") not in ("", "0"):
    _impl = _purepy
    BACKEND = "purepy"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _purepy
        BACKEND = "purepy"

filter_tick = _impl.filter_tick


def backends() -> dict:
    """Both lanes by name (the compiled one only if importable)."""
    out = {"purepy": _purepy}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
