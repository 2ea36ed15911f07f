"""Selects the kernel implementation at import time.

The compiled extension (``dkrc._kernels``) is used when it imported
cleanly; otherwise the pure numpy module takes over. Set
``DKRC_BACKEND=python`` or ``DKRC_BACKEND=compiled`` to force a choice
(forcing ``compiled`` raises if the extension is missing).
"""

import os

from . import _kernels_py

_forced = os.environ.get("DKRC_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        if _forced == "compiled":
            raise ImportError(
                "DKRC_BACKEND=compiled but the dkrc._kernels extension is not built"
            )
        _impl = _kernels_py


def name() -> str:
    """Active backend: 'compiled' or 'python'."""
    return "python" if _impl is _kernels_py else "compiled"


def available() -> dict:
    """All importable kernel modules keyed by backend name (for tests/benchmarks)."""
    mods = {"python": _kernels_py}
    try:
        from . import _kernels

        mods["compiled"] = _kernels
    except ImportError:
        pass
    return mods


mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
pgd_box_qp = _impl.pgd_box_qp
