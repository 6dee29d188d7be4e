"""Vectorized numpy implementation of the batched estimator kernels.

Fallback for :mod:`paulitomo._ckernels`; both expose the same three
functions and must agree to rounding. Every array carries a leading batch
axis ``B``.
"""
import numpy as np

_A = np.array([1.0, 1.0, -1.0, -1.0])
_B = np.array([1.0, -1.0, 1.0, -1.0])
_AB = _A * _B


def correlations(counts):
    """Pauli correlation averages and binomial standard errors.

    ``counts`` is ``(B, 3, 3, 4)``; every setting total must be positive.
    Returns ``(values, stderr)``, both ``(B, 4, 4)``.
    """
    counts = np.asarray(counts, dtype=np.float64)
    nb = counts.shape[0]
    tot = counts.sum(axis=-1)
    vals = np.zeros((nb, 4, 4))
    n = np.zeros((nb, 4, 4))
    vals[:, 0, 0] = 1.0
    vals[:, 1:, 1:] = (counts @ _AB) / tot
    n[:, 1:, 1:] = tot
    # marginals pooled over the three settings that share the axis
    row_tot = tot.sum(axis=2)
    col_tot = tot.sum(axis=1)
    vals[:, 1:, 0] = (counts @ _A).sum(axis=2) / row_tot
    vals[:, 0, 1:] = (counts @ _B).sum(axis=1) / col_tot
    n[:, 1:, 0] = row_tot
    n[:, 0, 1:] = col_tot
    err = np.zeros((nb, 4, 4))
    mask = n > 0
    err[mask] = np.sqrt(np.clip(1.0 - vals[mask] ** 2, 0.0, None) / n[mask])
    return vals, err


def states(values, qtab, reference):
    """State matrices from correlations by Pauli expansion.

    ``qtab[r, n, m, i, j]`` is the expansion tensor for reference pair
    ``r = 2 * r1 + r2``. ``reference < 0`` picks, per batch item, the pair with
    the largest reference probability. Returns ``(psi, p, ref)``; ``psi`` is
    NaN wherever ``p <= 0``.
    """
    values = np.asarray(values, dtype=np.float64)
    nb = values.shape[0]
    diag = qtab[np.arange(4), [0, 0, 1, 1], [0, 1, 0, 1]].real  # (4, 4, 4)
    p_all = 0.25 * np.einsum("rij,bij->br", diag, values)
    if reference < 0:
        ref = np.argmax(p_all, axis=1)
    else:
        ref = np.full(nb, reference, dtype=np.intp)
    p = p_all[np.arange(nb), ref]
    raw = 0.25 * np.einsum("bnmij,bij->bnm", qtab[ref], values)
    with np.errstate(invalid="ignore", divide="ignore"):
        psi = raw / np.sqrt(np.where(p > 0, p, np.nan))[:, None, None]
    r1, r2 = ref // 2, ref % 2
    ok = p > 0
    psi[np.arange(nb)[ok], r1[ok], r2[ok]] = np.sqrt(p[ok])
    return psi, p, ref.astype(np.int64)


def unitaries(psi_out, psi_in):
    """``psi_out @ inv(psi_in)`` per batch item, with ``det(psi_in)``."""
    psi_out = np.asarray(psi_out, dtype=np.complex128)
    psi_in = np.asarray(psi_in, dtype=np.complex128)
    a, b = psi_in[:, 0, 0], psi_in[:, 0, 1]
    c, d = psi_in[:, 1, 0], psi_in[:, 1, 1]
    det = a * d - b * c
    inv = np.empty_like(psi_in)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv[:, 0, 0] = d / det
        inv[:, 0, 1] = -b / det
        inv[:, 1, 0] = -c / det
        inv[:, 1, 1] = a / det
    return psi_out @ inv, det
