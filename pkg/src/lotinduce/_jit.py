"""Numba shim.

Kernels are decorated with :func:`njit` from here. Setting the environment
variable ``LOTINDUCE_PURE_PYTHON=1`` (or running without numba installed)
turns the decorator into a no-op so the same kernel source runs as plain
numpy/Python. Compiled dispatchers keep the original function on
``.py_func``, which the tests use to cross-check both paths.
"""
from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

PURE_PYTHON = os.environ.get("LOTINDUCE_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}

HAVE_NUMBA = False
if not PURE_PYTHON:
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        logger.warning("numba not importable; falling back to pure-python kernels")


def _null_decorator(pyfunc=None, **kwargs):
    def wrap(func):
        func.py_func = func
        return func

    return wrap if pyfunc is None else wrap(pyfunc)


if HAVE_NUMBA:
    njit = numba.njit
else:
    njit = _null_decorator


def backend() -> str:
    return "numba" if HAVE_NUMBA else "python"
