"""Kernel backend selection.

``IDMWP_BACKEND=numpy`` forces the vectorized fallback; anything else (or
unset) uses the numba kernels when numba imports, and falls back otherwise.
"""

import logging
import os

log = logging.getLogger(__name__)

ENV_FLAG = "IDMWP_BACKEND"

_requested = os.environ.get(ENV_FLAG, "numba").strip().lower()

if _requested == "numpy":
    from . import kernels_numpy as kernels
else:
    if _requested != "numba":
        log.warning("unknown %s=%r, using numba", ENV_FLAG, _requested)
    try:
        from . import kernels_numba as kernels
    except ImportError:  # pragma: no cover - depends on the environment
        log.warning("numba unavailable, using the numpy kernels")
        from . import kernels_numpy as kernels

BACKEND = kernels.NAME

__all__ = ["BACKEND", "ENV_FLAG", "kernels"]
