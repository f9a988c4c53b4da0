"""Kernel backend selection: compiled extension if present, numpy otherwise."""

from __future__ import annotations

from . import _kernels_py

try:  # pragma: no cover - depends on how the package was built
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

DEFAULT = _compiled if _compiled is not None else _kernels_py


def have_compiled() -> bool:
    return _compiled is not None


def active_backend() -> str:
    return "compiled" if _compiled is not None else "python"


def resolve(backend: str | None):
    """Return the kernel module for ``backend`` (None = best available)."""
    if backend is None:
        return DEFAULT
    if backend == "python":
        return _kernels_py
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available in this installation")
        return _compiled
    raise ValueError(f"unknown backend {backend!r} (use 'compiled' or 'python')")
