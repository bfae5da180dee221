"""Integrator kernels: compiled Cython core with a pure-Python fallback.

``rk4_batch`` comes from the compiled extension when it is importable and
from the numpy implementation otherwise; ``BACKEND`` records which one is
active. Both backends implement identical semantics (see ``_rk4_py``).
"""

try:
    from ._rk4_c import rk4_batch  # noqa: F401

    BACKEND = "c"
except ImportError:  # pragma: no cover - depends on build environment
    from ._rk4_py import rk4_batch  # noqa: F401

    BACKEND = "python"

__all__ = ["rk4_batch", "BACKEND"]
