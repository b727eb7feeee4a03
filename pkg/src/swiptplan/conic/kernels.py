"""Backend selection for the cone-algebra kernels.

Prefers the compiled extension; falls back to the pure-numpy implementation
when the build is unavailable or ``SWIPTPLAN_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import os

if os.environ.get("SWIPTPLAN_PURE_PYTHON", "") == "1":
    from . import _kernels_py as impl
else:
    try:
        from . import _kernels as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as impl

BACKEND = impl.BACKEND

identity = impl.identity
min_eig = impl.min_eig
compute_scaling = impl.compute_scaling
apply_w = impl.apply_w
apply_w_mat = impl.apply_w_mat
jordan_mul = impl.jordan_mul
jordan_solve = impl.jordan_solve
max_step = impl.max_step
