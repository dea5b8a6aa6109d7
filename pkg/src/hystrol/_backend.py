"""Pick the compiled kernels when available, else the pure-Python twins.

Set ``HYSTROL_BACKEND=python`` to force the fallback, or ``cython`` to
require the extension (import fails loudly if it is missing).
"""
import os

_choice = os.environ.get("HYSTROL_BACKEND", "auto").strip().lower()

if _choice == "python":
    from . import _kernels_py as kernels
    NAME = "python"
elif _choice == "cython":
    from . import _kernels as kernels
    NAME = "cython"
else:
    try:
        from . import _kernels as kernels
        NAME = "cython"
    except ImportError:
        from . import _kernels_py as kernels
        NAME = "python"

__all__ = ["kernels", "NAME"]
