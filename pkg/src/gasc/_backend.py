"""Select the compiled kernels when available, else the pure-Python ones.

Set ``GASC_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback
from ._fallback import AUX, LAPLACE  # noqa: F401

kernels = _fallback
if os.environ.get("GASC_PURE_PYTHON", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:  # extension not built
        kernels = _fallback

BACKEND = kernels.NAME


def ln_sweep(params, counts, precision, sigma0, uniforms, scheme=AUX | LAPLACE):
    return kernels.ln_sweep(params, counts, float(precision), float(sigma0), uniforms, int(scheme))


def sgns_chunk(w_in, w_out, tokens, indptr, window, negs, alpha0, min_alpha, done, total):
    return kernels.sgns_chunk(w_in, w_out, tokens, indptr, int(window), negs,
                              float(alpha0), float(min_alpha), int(done), int(total))
