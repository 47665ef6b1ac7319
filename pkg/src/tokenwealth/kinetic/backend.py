"""Pick the exchange-loop implementation at import time.

The compiled kernel is used when it was built; setting
``TOKENWEALTH_PURE_PYTHON=1`` forces the Python loop. Both consume the same
pre-drawn arrays and give bit-identical results.
"""
import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

KERNELS = {"python": _pykernel.exchange}
if _ckernel is not None:
    KERNELS["cython"] = _ckernel.exchange

if os.environ.get("TOKENWEALTH_PURE_PYTHON", "") not in ("", "0") or _ckernel is None:
    DEFAULT = "python"
else:
    DEFAULT = "cython"


def available_backends():
    return sorted(KERNELS)


def get_kernel(name=None):
    name = DEFAULT if name is None else name
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}") from None
