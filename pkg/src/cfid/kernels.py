"""Backend selection for the enumeration kernel.

The compiled extension is used when it was built; otherwise the numpy fallback.
``CFID_KERNEL=python`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
evaluate_world = _kernels_py.evaluate_world

if os.environ.get("CFID_KERNEL", "").lower() != "python":
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        evaluate_world = _kernels.evaluate_world

__all__ = ["BACKEND", "evaluate_world"]
