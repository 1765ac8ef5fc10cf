"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
NumPy fallback. Set ``TGI3D_BACKEND=python`` to force the fallback.
"""

import os

if os.environ.get("TGI3D_BACKEND", "").lower() == "python":
    from tgi3d import _fallback as kernels
    NAME = "python"
else:
    try:
        from tgi3d import _kernels as kernels
        NAME = "cython"
    except ImportError:
        from tgi3d import _fallback as kernels
        NAME = "python"

from tgi3d import _fallback as fallback  # noqa: E402

__all__ = ["NAME", "kernels", "fallback"]
