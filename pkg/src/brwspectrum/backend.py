"""Monte Carlo backend selection: compiled extension with Python fallback.

The compiled core and the pure-Python reference consume randomness in the
same order and perform the same float arithmetic, so results are
bit-identical; the compiled core is simply much faster on large runs.
"""
from __future__ import annotations

from . import _mc_fallback
from .errors import InvalidParameterError

try:
    from . import _mc_core

    HAVE_COMPILED = True
except ImportError:  # extension not built: stay on the reference loop
    _mc_core = None
    HAVE_COMPILED = False

DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"


def get_backend(name: str | None = None):
    """Resolve a backend module by name: 'compiled', 'python', or None/'auto'."""
    if name in (None, "auto"):
        name = DEFAULT_BACKEND
    if name == "python":
        return _mc_fallback
    if name == "compiled":
        if not HAVE_COMPILED:
            raise InvalidParameterError("compiled backend requested but not built")
        return _mc_core
    raise InvalidParameterError(f"unknown backend {name!r}")
