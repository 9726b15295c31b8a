"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``IGPK_BACKEND=python`` is set, the numpy versions
are used. Both expose ``increment_qr`` with its ``workspace``,
``chol_downdate``, ``chol_update`` and ``chol_unblocked``.
"""
import importlib
import logging
import os

from . import _kernels_py

log = logging.getLogger("igpk")

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available_backends():
    """Names of the importable backends, compiled first."""
    return (["compiled"] if _compiled is not None else []) + ["python"]


def get_backend(name="auto"):
    """Return the kernel module for ``name`` in {auto, compiled, python}."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    if name != "auto":
        raise ValueError(f"unknown backend {name!r}")
    return _compiled if _compiled is not None else _kernels_py


def _select():
    choice = os.environ.get("IGPK_BACKEND", "auto").strip().lower() or "auto"
    try:
        return get_backend(choice)
    except (ImportError, ValueError) as exc:
        log.warning("backend %r unavailable (%s); using python", choice, exc)
        return _kernels_py


_impl = _select()
BACKEND = "compiled" if _impl is _compiled else "python"

increment_qr = _impl.increment_qr
workspace = _impl.workspace
chol_downdate = _impl.chol_downdate
chol_update = _impl.chol_update
chol_unblocked = _impl.chol_unblocked


def reload_backend():
    """Re-read ``IGPK_BACKEND``; used by tests that switch backends."""
    return importlib.reload(importlib.import_module(__name__))
