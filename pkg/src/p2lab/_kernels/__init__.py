"""Kernel backend selection.

The compiled Cython extension is preferred; the numpy implementation is the
fallback. Set P2LAB_PURE_PYTHON=1 to force the fallback (used by the
benchmark and by backend-consistency tests).
"""

import os

if os.environ.get("P2LAB_PURE_PYTHON"):
    from p2lab._kernels import pykernels as _impl

    BACKEND = "python"
else:
    try:
        from p2lab._kernels import ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        from p2lab._kernels import pykernels as _impl

        BACKEND = "python"

p_energy_raw = _impl.p_energy_raw
p2_gradient = _impl.p2_gradient

__all__ = ["BACKEND", "p_energy_raw", "p2_gradient"]
