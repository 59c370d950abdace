"""Kernel backend selection: compiled extension when built, numpy otherwise.

Override with JOULENAS_BACKEND=numpy|cython (default: auto).
"""

from __future__ import annotations

import os

from . import _kernels_np


def _load_compiled():
    try:
        from . import _kernels_cy  # type: ignore[attr-defined]

        return _kernels_cy
    except ImportError:
        return None


def _select():
    requested = os.environ.get("JOULENAS_BACKEND", "auto").strip().lower()
    if requested in ("", "auto"):
        compiled = _load_compiled()
        return compiled if compiled is not None else _kernels_np
    if requested in ("numpy", "python", "py"):
        return _kernels_np
    if requested in ("cython", "compiled", "c"):
        compiled = _load_compiled()
        if compiled is None:
            raise ImportError(
                "JOULENAS_BACKEND requested the compiled kernels but the extension "
                "is not built; run `pip install -e . --no-build-isolation`"
            )
        return compiled
    raise ValueError(f"unknown JOULENAS_BACKEND value: {requested!r}")


ACTIVE = _select()


def backend_name() -> str:
    return ACTIVE.NAME


def available_backends() -> dict:
    """Name -> kernel module, for benchmarking and cross-checking."""
    out = {_kernels_np.NAME: _kernels_np}
    compiled = _load_compiled()
    if compiled is not None:
        out[compiled.NAME] = compiled
    return out
