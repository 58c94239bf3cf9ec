"""Kernel backend selection.

Two implementations of the hot lattice kernels exist: a Cython extension
(_ckernels) and a pure-numpy reference (pykernels). They consume identical
prepared arguments and draw identical counter-stream randomness; outputs
agree to floating-point rounding (integer hash streams are bit-identical,
transcendental functions may differ in the last ulp between libm and
numpy's vectorized routines).

Selection happens at import: the compiled module if it built, else numpy.
Override with DPRE_BACKEND=python (force fallback) or DPRE_BACKEND=c
(require the extension; ImportError if absent). Operations the extension
does not specialize (d=3 transfer, coincidence DPs) always run on numpy.
"""

import os

from . import pykernels

_choice = os.environ.get("DPRE_BACKEND", "auto").lower()

if _choice in ("py", "python", "numpy"):
    _ck = None
elif _choice in ("c", "cython", "compiled"):
    from . import _ckernels as _ck  # hard requirement, let ImportError surface
else:
    try:
        from . import _ckernels as _ck
    except ImportError:
        _ck = None


def backend_name() -> str:
    return "cython" if _ck is not None else "python"


def has_compiled() -> bool:
    return _ck is not None


def transfer_logw(tab, n, d, start, t0=0, masks=None, cap_bytes=None):
    if _ck is not None and d in (1, 2):
        return _ck.transfer_logw(tab, n, d, start, t0, masks, cap_bytes)
    return pykernels.transfer_logw(tab, n, d, start, t0, masks, cap_bytes)


def chaos_orders(tab, q, N, box, t0=0, cap=None):
    if _ck is not None:
        return _ck.chaos_orders(tab, q, N, box, t0, cap)
    return pykernels.chaos_orders(tab, q, N, box, t0, cap)


def backward_product(tab, N, box, t0=0, cap=None):
    if _ck is not None:
        return _ck.backward_product(tab, N, box, t0, cap)
    return pykernels.backward_product(tab, N, box, t0, cap)


def renewal_sum(lam1, first, r):
    if _ck is not None:
        return _ck.renewal_sum(lam1, first, r)
    return pykernels.renewal_sum(lam1, first, r)


def eta_block(tab, t0, n, box):
    if _ck is not None and len(box) == 2:
        return _ck.eta_block(tab, t0, n, box)
    return pykernels.eta_block(tab, t0, n, box)


# numpy-only operations (cold paths)
coincidence_forward = pykernels.coincidence_forward
coincidence_backward = pykernels.coincidence_backward
