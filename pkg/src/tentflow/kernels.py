"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or with
``TENTFLOW_PURE_PYTHON=1``) the numpy fallback is used.
"""

import os
from types import ModuleType

from . import _kernels_py


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return None
    return _kernels


compiled = _load_compiled()

if compiled is not None and not os.environ.get("TENTFLOW_PURE_PYTHON"):
    backend = compiled
    BACKEND = "compiled"
else:
    backend = _kernels_py
    BACKEND = "python"


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if compiled is None:
            raise ImportError("compiled kernels are not built (run `pip install -e .`)")
        return compiled
    raise ValueError(f"unknown backend {name!r}")


ball_sums = backend.ball_sums
pair_difference_sum = backend.pair_difference_sum
interp_periodic = backend.interp_periodic
