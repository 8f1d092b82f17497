"""Kernel backend selection.

The hot numeric core (noncentral chi-square CDF/quantile, batched tolerance
widths) exists twice: a Cython extension (`_native`) and a pure NumPy
fallback (`pure`). The native build is used when importable; set
``DSPACE_PURE=1`` to force the fallback. Both expose the same functions and
implement the same algorithm, so results agree to the bisection tolerance.
"""

from __future__ import annotations

import os

from . import pure as _pure

_impl = _pure
if os.environ.get("DSPACE_PURE", "") != "1":
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

backend_name: str = _impl.BACKEND_NAME
ncx2_cdf = _impl.ncx2_cdf
ncx2_ppf = _impl.ncx2_ppf
chi2_ppf = _impl.chi2_ppf
ti_halfwidths = _impl.ti_halfwidths
KernelConvergenceError = _impl.KernelConvergenceError


def get_backend(name: str):
    """Return a specific backend module ("native" or "pure").

    Used by the backend benchmark and cross-checking tests; raises
    ImportError when the native extension is not built.
    """
    if name == "pure":
        return _pure
    if name == "native":
        from . import _native

        return _native
    raise ValueError(f"unknown kernel backend: {name!r}")
