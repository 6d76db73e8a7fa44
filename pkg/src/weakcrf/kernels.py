"""Chain kernels, compiled when available.

Set ``WEAKCRF_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("WEAKCRF_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

chain_logz = _impl.chain_logz
forward_backward = _impl.forward_backward
viterbi = _impl.viterbi

__all__ = ["BACKEND", "chain_logz", "forward_backward", "viterbi"]
