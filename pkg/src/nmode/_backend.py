"""Select the kernel implementation at import time.

The compiled extension is preferred; ``NMODE_BACKEND=python`` forces the
numpy fallback, ``NMODE_BACKEND=compiled`` makes a missing extension an error.
"""

import os

from . import _kernels_py

_choice = os.environ.get("NMODE_BACKEND", "auto").lower()

if _choice == "python":
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        kernels = _kernels_py
        BACKEND = "python"

__all__ = ["kernels", "BACKEND", "_kernels_py"]
