"""Numba acceleration switch for the hot numeric kernels.

Modules with tight inner loops (the Monte Carlo trial loop in ``theory``,
the categorical draw sampler in ``scenarios``) define both a numba
``@njit`` kernel and a pure-numpy fallback.  Which one runs is decided at
import time:

* numba importable and ``CAUSEREG_DISABLE_NUMBA`` unset/empty -> njit path
* otherwise -> numpy path

Set the environment variable before importing the package to force the
fallback.  Both paths are deterministic given a seed (random numbers are
always drawn by numpy outside the kernels), but they are not guaranteed to
be bit-identical to each other because summation order differs.
``benchmarks/bench_kernels.py`` times the two paths side by side.
"""

from __future__ import annotations

import os

ENV_DISABLE = "CAUSEREG_DISABLE_NUMBA"


def _probe() -> bool:
    if os.environ.get(ENV_DISABLE, "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _probe()


def njit_or_none(**options):
    """Return ``numba.njit(**options)`` when enabled, else None.

    Callers decorate their kernel only when the decorator exists and fall
    back to the numpy implementation otherwise, e.g.::

        _kernel_jit = None
        if (dec := njit_or_none(cache=True)) is not None:
            _kernel_jit = dec(_kernel_py)
    """
    if not NUMBA_ENABLED:
        return None
    import numba

    return numba.njit(**options)
