"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

``DGFEFET_BACKEND=python`` forces the fallback; ``=cython`` makes a missing
extension an import error instead of a silent downgrade.
"""

from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": _kernel_py.run_batch}
if _compiled is not None:
    _KERNELS["cython"] = _compiled.run_batch

_requested = os.environ.get("DGFEFET_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"unknown DGFEFET_BACKEND {_requested!r}")
if _requested == "cython" and _compiled is None:
    raise ImportError("DGFEFET_BACKEND=cython but dgfefet.snn._kernel is not built")

DEFAULT_BACKEND = _requested or ("cython" if _compiled is not None else "python")


def available() -> list[str]:
    return sorted(_KERNELS)


def get_kernel(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return _KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available()}") from None
