"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``VOPT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("VOPT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

adjacent_pairs = _impl.adjacent_pairs
dominated_mask = _impl.dominated_mask
widest_box = _impl.widest_box
