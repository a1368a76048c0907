"""Backend selection for the numeric kernels.

Kernels come in two flavours: a numba ``@njit`` version and a pure-numpy
version.  The numba path is used unless ``MWCOMPLETE_DISABLE_NUMBA`` is set
to a truthy value or numba cannot be imported.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

HAVE_NUMBA = _numba is not None


def numba_enabled():
    flag = os.environ.get("MWCOMPLETE_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
