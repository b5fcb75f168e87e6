"""Pick the compiled kernels when available, else the numpy versions.

Set ``RADONRIDGE_PURE_PYTHON=1`` to force the numpy implementations.
"""

import os

from . import _kernels_py as python_kernels

try:
    if os.environ.get("RADONRIDGE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as compiled_kernels
except ImportError:
    compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"

line_integrals = kernels.line_integrals
backproject_linear = kernels.backproject_linear
lasso_cd = kernels.lasso_cd
