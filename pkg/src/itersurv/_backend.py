"""Backend selection: the compiled kernels when importable, numpy otherwise.

``ITERSURV_BACKEND`` (``auto``, ``compiled`` or ``python``) overrides the
default; :func:`get` also takes the name directly.
"""

from __future__ import annotations

import os

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

NAMES = ("auto", "compiled", "python")


def available() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def get(name: str | None = None):
    """The backend module for ``name`` (``None`` reads ``ITERSURV_BACKEND``)."""
    if name is None:
        name = os.environ.get("ITERSURV_BACKEND", "auto")
    name = str(name).lower()
    if name not in NAMES:
        raise ValueError(f"unknown backend {name!r}; choose from {NAMES}")
    if name == "python":
        return _fallback
    if _core is None:
        if name == "compiled":
            raise ImportError("the compiled backend is not built; reinstall the package")
        return _fallback
    return _core


def active_name(name: str | None = None) -> str:
    return "python" if get(name) is _fallback else "compiled"
