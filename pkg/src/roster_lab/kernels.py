"""Backend selection for the numeric core.

The compiled extension is used when it imports; ``ROSTER_LAB_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

from roster_lab import _pykernels

if os.environ.get("ROSTER_LAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from roster_lab import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

bpr = _impl.bpr
route_table = _impl.route_table
sample_block = _impl.sample_block
sampled_summary = _impl.sampled_summary

__all__ = ["BACKEND", "bpr", "route_table", "sample_block", "sampled_summary"]
