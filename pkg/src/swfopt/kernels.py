"""Backend selection for the hot grid-enumeration kernel.

The compiled extension (``swfopt._grid``) is used when it was built;
otherwise, or when ``SWFOPT_PURE_PYTHON=1`` is set, the numpy twin in
``swfopt._grid_py`` is used.  Both expose the same ``grid_argmax``.
"""

from __future__ import annotations

import os

import numpy as np

from . import _grid_py
from ._grid_py import FAMILY_CODES

try:
    from . import _grid as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = ("compiled", "python") if _compiled is not None else ("python",)
BACKEND = (
    "python"
    if _compiled is None or os.environ.get("SWFOPT_PURE_PYTHON", "") not in ("", "0")
    else "compiled"
)


def grid_argmax(p, kmax, budget_units, step, family, alpha=0.0, delta=0.0,
                eps=1e-6, umax=None, backend=None):
    """Best lattice allocation; see ``_grid.pyx`` for the enumeration contract."""
    backend = backend or BACKEND
    p = np.ascontiguousarray(p, dtype=np.float64)
    kmax = np.ascontiguousarray(kmax, dtype=np.int64)
    umax = np.ascontiguousarray([] if umax is None else umax, dtype=np.float64)
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled grid kernel is not available")
        impl = _compiled.grid_argmax
    elif backend == "python":
        impl = _grid_py.grid_argmax
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return impl(p, kmax, int(budget_units), float(step), int(family),
                float(alpha), float(delta), float(eps), umax)


__all__ = ["BACKEND", "BACKENDS", "FAMILY_CODES", "grid_argmax"]
