"""Kernel backend selection.

The compiled module is used when it imports; setting ``CONSENSUS_CERT_PURE=1``
forces the pure-Python fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("CONSENSUS_CERT_PURE"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

mul_fold = _impl.mul_fold
set_equality_batch = _impl.set_equality_batch
