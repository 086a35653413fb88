"""Select the compiled kernels when available, else the numpy fallback.

Set ``HOMOG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from homog import _fallback

if os.environ.get("HOMOG_PURE_PYTHON") == "1":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from homog import _kernels as kernels
    except ImportError:
        kernels = _fallback
        BACKEND = "python"
    else:
        BACKEND = "compiled"

__all__ = ["BACKEND", "kernels"]
