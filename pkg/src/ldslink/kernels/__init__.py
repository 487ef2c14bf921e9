"""Hot search kernels with backend selection at import.

The compiled Cython core is used when present; otherwise the numpy
fallback. Set LDSLINK_KERNELS=py to force the fallback, or =c to require
the compiled core (ImportError if missing). Both backends are importable
side by side (kernels.pyref / kernels._core) for parity tests and the
benchmark.
"""

import os

from . import pyref

_choice = os.environ.get("LDSLINK_KERNELS", "auto")
_impl = None
if _choice in ("auto", "c"):
    try:
        from . import _core as _impl
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "LDSLINK_KERNELS=c but the compiled core is not built; "
                "run `python setup.py build_ext --inplace`"
            ) from None
if _impl is None:
    _impl = pyref

BACKEND = _impl.BACKEND
g_row = _impl.g_row
sweep_argmax = _impl.sweep_argmax
pair_sum = _impl.pair_sum
