"""Select the recurrence sweep implementation at import time.

The compiled ``bandspec._sweep`` is used when it was built; otherwise, or
when ``BANDSPEC_PURE_PYTHON`` is set to a non-empty value, the numpy
fallback in ``bandspec._sweep_py`` is used.
"""
import os

from . import _sweep_py


def _load_compiled():
    try:
        from . import _sweep
    except ImportError:
        return None
    return _sweep.sweep


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("BANDSPEC_PURE_PYTHON"):
    sweep = _compiled
    BACKEND = "cython"
else:
    sweep = _sweep_py.sweep
    BACKEND = "python"


def available():
    """Names of the sweep implementations importable in this environment."""
    return ["python"] + (["cython"] if _compiled is not None else [])


def get(name):
    """Return the sweep function called `name` ('python' or 'cython')."""
    if name == "python":
        return _sweep_py.sweep
    if name == "cython" and _compiled is not None:
        return _compiled
    raise ValueError(f"sweep backend {name!r} is not available")
