"""Path kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set
``RATINGXVA_BACKEND=python`` to force the fallback (or ``compiled`` to fail
loudly when the extension is missing). Both backends consume the random
streams in the same order and return identical paths.
"""

from __future__ import annotations

import os

from . import _pykernels

_choice = os.environ.get("RATINGXVA_BACKEND", "auto").strip().lower()

if _choice == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _pykernels
        BACKEND = "python"

simulate_chains = _impl.simulate_chains
ou_paths = _impl.ou_paths
first_passage = _impl.first_passage
states_at = _impl.states_at
NONE = _pykernels.NONE


def backends() -> dict:
    """Available kernel modules by name (used by tests and the benchmark)."""
    out = {"python": _pykernels}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "NONE", "backends", "first_passage", "ou_paths", "simulate_chains", "states_at"]
