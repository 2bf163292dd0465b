"""Kernel selection.

The compiled kernel is used when it imports; set ``RPPKIT_PURE_PYTHON=1`` to
force the NumPy fallback.  Both produce the same statistics to rounding.
"""
import os

from . import _kernels_py

NSTATS = _kernels_py.NSTATS
(SUM_LOGF, EXPOSURE, DX_DMU, DX_DSIGMA,
 DLOGF_DMU, DLOGF_DSIGMA, F_T) = range(NSTATS)

python_item_stats = _kernels_py.item_stats
compiled_item_stats = None
try:
    from ._kernels import item_stats as compiled_item_stats
except ImportError:
    pass

if compiled_item_stats is not None and not os.environ.get("RPPKIT_PURE_PYTHON"):
    item_stats = compiled_item_stats
    BACKEND = "cython"
else:
    item_stats = python_item_stats
    BACKEND = "python"
