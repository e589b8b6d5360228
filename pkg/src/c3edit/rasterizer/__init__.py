"""Rasterizer backend selection.

The compiled Cython core is preferred when its extension module built;
otherwise the pure-PyTorch implementation is used. Override with the
environment variable C3EDIT_RASTERIZER={auto,compiled,pure}. Both backends
implement the same math (see benchmarks/bench_rasterizer.py for a speed
comparison).
"""

import os

from . import pure

_requested = os.environ.get("C3EDIT_RASTERIZER", "auto").lower()

if _requested not in ("auto", "compiled", "pure"):
    raise ValueError(
        f"C3EDIT_RASTERIZER must be one of auto/compiled/pure, got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import compiled as _impl
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "compiled rasterizer requested via C3EDIT_RASTERIZER but the "
                "extension module is not built; run `pip install -e .` or "
                "`python setup.py build_ext --inplace`"
            )
if _impl is None:
    _impl = pure

rasterize = _impl.rasterize


def active_backend() -> str:
    return _impl.BACKEND_NAME


def get_backend(name: str):
    """Fetch a specific backend module (used by tests and benchmarks)."""
    if name == "pure":
        return pure
    if name == "compiled":
        from . import compiled

        return compiled
    raise ValueError(f"unknown rasterizer backend {name!r}")
