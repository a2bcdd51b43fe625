"""Scoring kernel dispatch: compiled extension when built, numpy otherwise.

Set TGXPLAIN_FORCE_PYTHON=1 to skip the extension (used by the backend
benchmark and by tests that pin a backend).
"""

from __future__ import annotations

import os

from . import _scorekit_py

if os.environ.get("TGXPLAIN_FORCE_PYTHON"):
    _impl = _scorekit_py
else:
    try:
        from . import _scorekit as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _scorekit_py

BACKEND: str = _impl.BACKEND
family_counts = _impl.family_counts
loglik_from_counts = _impl.loglik_from_counts
family_loglik = _impl.family_loglik
