"""Backend selection for the simulation loop.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``DOCO_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the NumPy implementation is used.
"""

import os

from . import _kernels_py

python_simulate = _kernels_py.simulate

try:
    from ._ckernels import simulate as compiled_simulate
except ImportError:  # extension not built
    compiled_simulate = None

if compiled_simulate is not None and os.environ.get("DOCO_PURE_PYTHON", "0") in ("", "0"):
    simulate = compiled_simulate
    BACKEND = "compiled"
else:
    simulate = python_simulate
    BACKEND = "python"

__all__ = ["simulate", "python_simulate", "compiled_simulate", "BACKEND"]
