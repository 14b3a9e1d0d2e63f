"""Backend selection for the element kernels.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy implementation in ``_kernels_py``.  Setting ``SINGELLIPTIC_PURE_PYTHON=1``
forces the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SINGELLIPTIC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for the default)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def assemble_elements(grads, vols, uel, lam, w, p, alpha, expo, n, delta, backend=None):
    impl = get_backend(backend)
    return impl.assemble_elements(
        np.ascontiguousarray(grads, dtype=np.float64),
        np.ascontiguousarray(vols, dtype=np.float64),
        np.ascontiguousarray(uel, dtype=np.float64),
        np.ascontiguousarray(lam, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        float(p),
        float(alpha),
        float(expo),
        float(n),
        float(delta),
    )


def superlevel_measure(vals, vols, ts, backend=None):
    impl = get_backend(backend)
    return impl.superlevel_measure(
        np.ascontiguousarray(vals, dtype=np.float64),
        np.ascontiguousarray(vols, dtype=np.float64),
        np.ascontiguousarray(np.atleast_1d(ts), dtype=np.float64),
    )
