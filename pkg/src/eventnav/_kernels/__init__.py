"""Kernel selection: compiled scan when available, numpy fallback otherwise.

Set ``EVENTNAV_KERNEL=python`` or ``EVENTNAV_KERNEL=compiled`` to force a
backend (the latter raises if the extension was not built).
"""

from __future__ import annotations

import os

_choice = os.environ.get("EVENTNAV_KERNEL", "auto").lower()

if _choice == "python":
    from ._scan_py import BACKEND, topk_scan
elif _choice == "compiled":
    from ._scan import BACKEND, topk_scan  # type: ignore[no-redef]
else:
    try:
        from ._scan import BACKEND, topk_scan  # type: ignore[no-redef]
    except ImportError:
        from ._scan_py import BACKEND, topk_scan  # type: ignore[no-redef]


def kernel_backend() -> str:
    """Name of the active scan implementation: "cython" or "python"."""
    return BACKEND


__all__ = ["topk_scan", "kernel_backend", "BACKEND"]
