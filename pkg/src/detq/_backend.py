"""Pick the compiled kernels when available, else the pure-Python ones.

Set ``DETQ_PURE=1`` to force the fallback.
"""
import os

from . import _pure

NAME = "python"
kernels = _pure

if not os.environ.get("DETQ_PURE"):
    try:
        from . import _kernels as kernels  # noqa: F811
        NAME = "cython"
    except ImportError:
        pass


def get(name: str | None = None):
    """Return a kernel module by name ('cython', 'python') or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pure
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
