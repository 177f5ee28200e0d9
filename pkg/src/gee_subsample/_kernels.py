"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy
implementation in :mod:`._pykernels` takes over. Setting
``GEE_SUBSAMPLE_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from . import _pykernels

_IMPLS = {"python": _pykernels}
try:
    from . import _ckernels

    _IMPLS["cython"] = _ckernels
except ImportError:  # extension not built
    pass

if os.environ.get("GEE_SUBSAMPLE_PURE_PYTHON", "") not in ("", "0"):
    BACKEND = "python"
else:
    BACKEND = "cython" if "cython" in _IMPLS else "python"


def available_backends():
    return sorted(_IMPLS)


def get_backend(name=None):
    """Kernel module by name; ``None`` gives the active one."""
    return _IMPLS[name or BACKEND]


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def standardize(X, y, beta, family_code, backend=None):
    return get_backend(backend).standardize(_f64(X), _f64(y), _f64(beta), int(family_code))


def accumulate(X, scale, resid, Rinv, weights, want_vectors=False, want_info=True, backend=None):
    return get_backend(backend).accumulate(
        _f64(X), _f64(scale), _f64(resid), _f64(Rinv), _f64(weights), want_vectors, want_info
    )


def alias_table(pi, backend=None):
    return get_backend(backend).alias_table(_f64(pi))
