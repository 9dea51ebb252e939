"""Backend selection for the numerical kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise
the numpy fallback in ``_pykernels`` is used. Set ``CPWLAB_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _pykernels


def _load_compiled():
    if os.environ.get("CPWLAB_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()
_active = _compiled if _compiled is not None else _pykernels

BACKEND = "cython" if _compiled is not None else "python"

ellipke_agm = _active.ellipke_agm
notch_model = _active.notch_model
abcd_shunt_s21 = _active.abcd_shunt_s21


def available_backends():
    """Map backend name to kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
