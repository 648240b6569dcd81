"""Select the Euler stepper at import time.

The compiled ``_euler`` extension is used when it was built; otherwise, or
when ``CSLIM_PURE_PYTHON`` is set to a non-empty value, the pure-Python
module with the same interface is used.
"""
import os

if os.environ.get("CSLIM_PURE_PYTHON"):
    from . import _euler_py as kernel

    BACKEND = "python"
else:
    try:
        from . import _euler as kernel

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _euler_py as kernel

        BACKEND = "python"

euler_chunk = kernel.euler_chunk

__all__ = ["BACKEND", "euler_chunk"]
