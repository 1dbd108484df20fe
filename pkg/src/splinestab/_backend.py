"""Select the compiled core or the NumPy fallback at import time.

Set ``SPLINESTAB_PURE=1`` to force the fallback. ``SPLINESTAB_THREADS``
caps the thread count used by the compiled loops and by the per-point
work pools.
"""
import logging
import os

import numpy as np

from . import _pycore

logger = logging.getLogger(__name__)

if os.environ.get("SPLINESTAB_PURE") == "1":
    _impl = _pycore
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        logger.debug("compiled core unavailable, using NumPy fallback")
        _impl = _pycore

BACKEND = "compiled" if _impl is not _pycore else "python"


def num_threads():
    raw = os.environ.get("SPLINESTAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def kernel_matrix(X, Y, power, use_log, impl=None):
    impl = impl or _impl
    return impl.kernel_matrix(_f64(X), _f64(Y), int(power), bool(use_log),
                              num_threads())


def kernel_apply(X, Y, power, use_log, coef, impl=None):
    impl = impl or _impl
    return impl.kernel_apply(_f64(X), _f64(Y), int(power), bool(use_log),
                             _f64(coef), num_threads())


def weighted_abs_sums(V, X, Y, rho, sigma, mask, impl=None):
    impl = impl or _impl
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    return impl.weighted_abs_sums(_f64(V), _f64(X), _f64(Y), _f64(rho),
                                  float(sigma), mask, num_threads())
