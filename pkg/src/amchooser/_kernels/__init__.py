"""Hot inner loops: Thomas elimination and projected SOR.

The compiled Cython extension is used when it imports; otherwise the
pure-Python module is used. Set ``AMCHOOSER_PURE_PYTHON=1`` to force the
fallback (the test suite does this to exercise both paths).
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("AMCHOOSER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels
else:
    _impl = _pykernels

thomas = _impl.thomas
psor = _impl.psor

__all__ = ["BACKEND", "thomas", "psor", "_pykernels"]
