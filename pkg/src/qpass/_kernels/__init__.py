"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable; set
``QPASS_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from qpass._kernels import _fallback

BACKENDS = {"python": _fallback}

try:
    from qpass._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("QPASS_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]
sample_categorical = _impl.sample_categorical
unlock_bell_probs = _impl.unlock_bell_probs
qubit_probs = _impl.qubit_probs


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: the active one)."""
    return BACKENDS[name or BACKEND]


__all__ = [
    "BACKEND",
    "BACKENDS",
    "get_backend",
    "qubit_probs",
    "sample_categorical",
    "unlock_bell_probs",
]
