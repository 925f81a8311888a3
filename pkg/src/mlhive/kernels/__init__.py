"""Distance kernels with a compiled core and a pure-numpy fallback.

The compiled backend is used when the extension built; set MLHIVE_PURE_PYTHON=1
to force the fallback. Both backends implement the same contract and agree to
float tolerance; any single process uses exactly one backend throughout.
"""

from __future__ import annotations

import os

from . import _pykernels

__all__ = ["pairwise_sq_euclidean", "pairwise_manhattan", "backend_name"]

_backend = _pykernels
_backend_label = "python"

if os.environ.get("MLHIVE_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _compiled

        _backend = _compiled
        _backend_label = "compiled"
    except ImportError:
        pass

pairwise_sq_euclidean = _backend.pairwise_sq_euclidean
pairwise_manhattan = _backend.pairwise_manhattan


def backend_name() -> str:
    return _backend_label
