"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``MODALGAME_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MODALGAME_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

tnc_objective = _impl.tnc_objective
origin_grid = _impl.origin_grid
