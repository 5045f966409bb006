"""Kernel backend selection.

The compiled extension is used when it was built; set
``REGRETSCOPE_PURE_PYTHON=1`` to force the pure-Python twin.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
q_learn = _pykernels.q_learn
rollout_returns = _pykernels.rollout_returns

if os.environ.get("REGRETSCOPE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        q_learn = _ckernels.q_learn
        rollout_returns = _ckernels.rollout_returns


def backend(name: str):
    """Return ``(q_learn, rollout_returns)`` for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels.q_learn, _pykernels.rollout_returns
    if name == "cython":
        from . import _ckernels

        return _ckernels.q_learn, _ckernels.rollout_returns
    raise ValueError(f"unknown kernel backend {name!r}")
