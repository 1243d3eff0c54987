"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation is used.  :func:`set_backend` switches at runtime, which the
benchmark and the cross-backend tests rely on.
"""
from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = _compiled if _compiled is not None else _kernels_py


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def set_backend(name):
    """Select ``"compiled"``, ``"python"`` or ``"auto"``; returns the previous name."""
    global _active
    prev = _active.NAME
    if name == "auto":
        _active = _compiled if _compiled is not None else _kernels_py
    elif name == "python":
        _active = _kernels_py
    elif name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        _active = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def backend_name():
    return _active.NAME


def kernels():
    return _active
