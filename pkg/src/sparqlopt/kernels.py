"""Backend selection for the mapping-table kernels.

The compiled extension is used when it was built; otherwise the
pure-Python implementation is loaded. Setting SPARQLOPT_PURE_PYTHON=1
forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SPARQLOPT_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"
join_rows = _impl.join_rows
minus_mask = _impl.minus_mask
