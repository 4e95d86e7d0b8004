"""Select the coordinate-descent kernel at import time.

The compiled extension is preferred; the pure-python implementation is the
fallback and can be forced with the environment variable
``PCLASSO_PURE_PYTHON=1`` (useful for debugging and for the kernel benchmark).
"""

from __future__ import annotations

import os

from . import _cd_python

_FORCE_PURE = os.environ.get("PCLASSO_PURE_PYTHON", "") == "1"

if not _FORCE_PURE:
    try:
        from . import _cd_kernel as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _cd_python
        BACKEND = "python"
else:
    _impl = _cd_python
    BACKEND = "python"

cd_sweeps = _impl.cd_sweeps


def backend_name() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return BACKEND
