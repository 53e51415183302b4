"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension is preferred when importable; set
CYCLESYNTH_PURE_KERNELS=1 to force the fallback. Both implementations
share exact tie-breaking semantics, so results are interchangeable.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("CYCLESYNTH_PURE_KERNELS", "") == "1":
    _impl = pure
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        KERNEL_BACKEND = "cython"
    except ImportError:
        _impl = pure
        KERNEL_BACKEND = "python"

assign_nearest = _impl.assign_nearest
kcenter_select = _impl.kcenter_select
bigram_counts = _impl.bigram_counts


def available_backends():
    """Name -> module for every importable kernel backend (for benchmarks/tests)."""
    backends = {"python": pure}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        backends["cython"] = _ckernels
    except ImportError:
        pass
    return backends
