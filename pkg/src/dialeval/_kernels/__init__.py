"""Token kernel backend selection.

Imports the compiled extension when available and falls back to the
pure-Python module otherwise.  ``DIALEVAL_PURE=1`` forces the fallback,
which the test suite and the benchmark use to exercise both paths.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("DIALEVAL_PURE") == "1":
    _impl = pure
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND: str = _impl.BACKEND
lcs_length = _impl.lcs_length
ngram_overlap = _impl.ngram_overlap
meteor_stats = _impl.meteor_stats

__all__ = ["BACKEND", "lcs_length", "ngram_overlap", "meteor_stats", "pure"]
