"""Backend selection: compiled kernels when available, NumPy fallback otherwise.

Set ``MCEN_PURE_PYTHON=1`` in the environment to force the fallback (used by
the backend-parity tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("MCEN_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

gaussian_sweeps = _impl.gaussian_sweeps
binomial_sweeps = _impl.binomial_sweeps
