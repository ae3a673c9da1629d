"""Hot-kernel dispatch.

The numba-compiled path is used when numba imports cleanly; setting
ROADMRF_NO_NUMBA=1 forces the pure-numpy reference implementations
(same results, slower). `benchmarks/bench_kernels.py` compares the two.
"""

from __future__ import annotations

import os

from . import _numpy as _np_impl

_flag = os.environ.get("ROADMRF_NO_NUMBA", "").strip()
USE_NUMBA = _flag not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from . import _numba as _impl
    except ImportError:  # numba missing or broken: quiet fallback
        USE_NUMBA = False
        _impl = _np_impl
else:
    _impl = _np_impl

BACKEND = "numba" if USE_NUMBA else "numpy"

slic_iterate = _impl.slic_iterate
label_components = _impl.label_components
hs_solve = _impl.hs_solve
mrf_sweep = _impl.mrf_sweep
raster_mesh = _impl.raster_mesh
raster_billboard = _impl.raster_billboard
diffuse_fill = _impl.diffuse_fill

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "slic_iterate",
    "label_components",
    "hs_solve",
    "mrf_sweep",
    "raster_mesh",
    "raster_billboard",
    "diffuse_fill",
]
