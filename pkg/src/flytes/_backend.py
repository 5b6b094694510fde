"""Selects the kernel backend at import time.

The compiled extension (``flytes._core``) is used when it was built;
otherwise the numpy implementation in ``flytes._fallback`` runs. Set
``FLYTES_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import contextlib
import os
from types import ModuleType
from typing import Iterator

from . import _fallback

BACKENDS: dict[str, ModuleType] = {"python": _fallback}
try:
    from . import _core
except ImportError:  # extension not built
    _core = None
else:
    BACKENDS["compiled"] = _core

_active: ModuleType


def _initial() -> ModuleType:
    want = os.environ.get("FLYTES_BACKEND", "auto")
    if want == "auto":
        return BACKENDS.get("compiled", _fallback)
    if want not in BACKENDS:
        raise ImportError(f"FLYTES_BACKEND={want!r} is not available; have {sorted(BACKENDS)}")
    return BACKENDS[want]


_active = _initial()


def get() -> ModuleType:
    return _active


def name() -> str:
    return "compiled" if _active is _core else "python"


def available() -> list[str]:
    return sorted(BACKENDS)


def set_backend(which: str) -> None:
    global _active
    if which == "auto":
        _active = BACKENDS.get("compiled", _fallback)
        return
    try:
        _active = BACKENDS[which]
    except KeyError:
        raise ValueError(f"backend {which!r} not available; have {available()}") from None


@contextlib.contextmanager
def use_backend(which: str) -> Iterator[None]:
    global _active
    saved = _active
    set_backend(which)
    try:
        yield
    finally:
        _active = saved
