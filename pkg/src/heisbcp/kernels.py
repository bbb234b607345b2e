"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the pure-Python
twin. Setting ``HEISBCP_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernel

if os.environ.get("HEISBCP_PURE_PYTHON", "") not in ("", "0"):
    _backend = _pykernel
else:
    try:
        from . import _ckernel as _backend
    except ImportError:  # extension not built
        _backend = _pykernel

BACKEND = _backend.BACKEND
KernelProfile = _backend.KernelProfile
eval_program = _backend.eval_program


def backends():
    """All importable kernel modules, compiled first."""
    mods = []
    try:
        from . import _ckernel

        mods.append(_ckernel)
    except ImportError:
        pass
    mods.append(_pykernel)
    return mods
