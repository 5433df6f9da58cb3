"""Backend selection for the hot integration loops.

The numba backend is used whenever numba imports cleanly; setting the
environment variable PTPFLOW_PURE_NUMPY=1 forces the vectorized numpy
fallback instead (useful on platforms without a working JIT, and for the
backend comparison benchmark). Both backends implement the same batch
API and stopping semantics.
"""

import os

_FORCED_NUMPY = os.environ.get("PTPFLOW_PURE_NUMPY", "0") not in ("0", "", "false")

if not _FORCED_NUMPY:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"
else:
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"

field_paths_rk4 = _impl.field_paths_rk4
field_paths_rk45 = _impl.field_paths_rk45
field_first_entry = _impl.field_first_entry
nino_paths_rk4 = _impl.nino_paths_rk4
warmup = _impl.warmup


def backend_module(name):
    """Fetch a specific backend module by name (for benchmarks and tests)."""
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    raise ValueError(f"unknown backend {name!r}")
