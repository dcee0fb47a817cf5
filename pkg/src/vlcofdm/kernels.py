"""Hot-loop kernels with import-time backend selection.

The compiled extension ``vlcofdm._bp`` is used when it was built;
otherwise the numpy implementation in ``vlcofdm._bp_py`` takes over.
Set ``VLCOFDM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _bp_py

if os.environ.get("VLCOFDM_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _bp as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
bp_decode = _compiled.bp_decode if _compiled is not None else _bp_py.bp_decode
bp_decode_python = _bp_py.bp_decode
bp_decode_compiled = _compiled.bp_decode if _compiled is not None else None

__all__ = ["BACKEND", "bp_decode", "bp_decode_python", "bp_decode_compiled"]
