"""Backend selection for the monomial kernels.

The compiled extension is preferred; set ``LITRESPONSE_PURE_PYTHON=1`` to
force the NumPy fallback (the benchmark and the parity tests do this).
"""

import os

from . import _kernels_py

if os.environ.get("LITRESPONSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
monomial_coo = _impl.monomial_coo
apply_monomials = _impl.apply_monomials


def available_backends():
    backends = {"numpy": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
