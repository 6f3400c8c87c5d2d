"""Kernel selection: compiled extension if importable, pure Python otherwise.

Set HARMAP_BACKEND=python to force the fallback lane (used by the benchmark
and by tests that compare the two lanes).
"""

import os

from . import _rk

_choice = os.environ.get("HARMAP_BACKEND", "").strip().lower()

_compiled = None
if _choice not in ("python", "py"):
    try:
        from . import _rkc as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

if _compiled is not None:
    integrate_x_ode = _compiled.integrate_x_ode
    BACKEND = "cython"
else:
    integrate_x_ode = _rk.integrate_x_ode
    BACKEND = "python"


def backend_name() -> str:
    """Active kernel lane, 'cython' or 'python'."""
    return BACKEND
