"""Backend selection for the batched estimator kernels.

The compiled extension is used when it was built; otherwise, or when
``PAULITOMO_PURE_PYTHON`` is set to a non-empty value, the numpy fallback is
used. Both backends expose ``correlations``, ``states`` and ``unitaries``.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if os.environ.get("PAULITOMO_PURE_PYTHON") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]


def get_backend(name=None):
    """Module implementing the kernels; ``None`` means the active backend."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}") from None


def correlations(counts):
    return _impl.correlations(counts)


def states(values, qtab, reference):
    return _impl.states(values, qtab, reference)


def unitaries(psi_out, psi_in):
    return _impl.unitaries(psi_out, psi_in)
