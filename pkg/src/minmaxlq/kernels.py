"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it was built; otherwise
(or with ``MINMAXLQ_PURE_PYTHON=1``) the numpy implementation in
``_pykernels`` is used.  Both expose the same four functions.
"""

import os

from . import _pykernels

if os.environ.get("MINMAXLQ_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

riccati_sweep = _impl.riccati_sweep
riccati_value = _impl.riccati_value
rollout = _impl.rollout
quadratic_cost = _impl.quadratic_cost


def compiled_kernels():
    """The compiled module, or ``None`` when the extension is unavailable."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels
