"""Kernel backend selection.

Hot path kernels exist in two implementations: numba ``@njit`` loops and a
pure-numpy vectorized fallback.  The active default is chosen once per
process from the ``QSDLAB_BACKEND`` environment variable:

* unset or ``auto``: numba if it imports, else numpy
* ``numba``: require numba, raise if unavailable
* ``numpy``: force the fallback even when numba is installed

Individual simulation calls can override the default with their ``backend=``
argument; everything outside the kernels is backend-independent.
"""

from __future__ import annotations

import os

ENV_VAR = "QSDLAB_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


def default_backend() -> str:
    """Backend selected by the environment, resolved at call time."""
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("QSDLAB_BACKEND=numba but numba is not importable")
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise RuntimeError(f"QSDLAB_BACKEND={choice!r} not recognized (use auto, numba, numpy)")


def resolve_backend(backend: str | None) -> str:
    """Normalize an explicit or defaulted backend name."""
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend
