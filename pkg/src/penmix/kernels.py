"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``PENMIX_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("PENMIX_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

e_step = _impl.e_step
em_pass = _impl.em_pass
sq_distances = _impl.sq_distances

__all__ = ["BACKEND", "e_step", "em_pass", "sq_distances"]
