"""Hot-kernel dispatch: the compiled extension when importable, NumPy otherwise.

Set ``ADAPTIVE_GAINSCHED_PURE=1`` to force the NumPy fallback.
"""

import os

from . import _kernels_py

IMPLEMENTATION = "python"
schur_accumulate = _kernels_py.schur_accumulate
svec_kron = _kernels_py.svec_kron
rk4_integrate = _kernels_py.rk4_integrate

if not os.environ.get("ADAPTIVE_GAINSCHED_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        IMPLEMENTATION = "compiled"
        schur_accumulate = _compiled.schur_accumulate
        svec_kron = _compiled.svec_kron
        rk4_integrate = _compiled.rk4_integrate


def get(name, implementation=None):
    """Look up a kernel by name, optionally forcing ``"python"`` or ``"compiled"``."""
    if implementation is None:
        return globals()[name]
    if implementation == "python":
        return getattr(_kernels_py, name)
    if implementation == "compiled":
        from . import _kernels
        return getattr(_kernels, name)
    raise ValueError(f"unknown implementation {implementation!r}")
