"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
versions take over. ``use_backend`` switches explicitly (tests, benchmarks).
"""

from contextlib import contextmanager

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNEL_NAMES = (
    "xoshiro_fill_u64",
    "xoshiro_fill_uniform",
    "xoshiro_permutation",
    "count_at_least",
    "bisect_critical",
)

_active = None
name = None


def available():
    """Names of the backends importable in this environment."""
    return ["compiled", "python"] if _compiled is not None else ["python"]


def use_backend(which):
    global _active, name
    if which == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _compiled
    elif which == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {which!r}")
    name = which


@contextmanager
def backend(which):
    previous = name
    use_backend(which)
    try:
        yield
    finally:
        use_backend(previous)


def kernel(fn_name):
    return getattr(_active, fn_name)


use_backend("compiled" if _compiled is not None else "python")
