"""Two-qubit pure states stored as their 2x2 coefficient matrix.

A state ``|Psi>> = sum_nm Psi[n, m] |n>|m>`` is kept as the matrix ``Psi``.
Beam 1 is the row index (the beam that passes through the device), beam 2
the column index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pauli_algebra as pa

RANK_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class TwoQubitPureState:
    psi: np.ndarray
    rank_tolerance: float = RANK_TOLERANCE

    def __post_init__(self):
        psi = np.array(self.psi, dtype=complex)
        if psi.shape != (2, 2):
            raise ValueError(f"state matrix must be 2x2, got shape {psi.shape}")
        if not np.all(np.isfinite(psi)):
            raise ValueError("state matrix has non-finite entries")
        norm = np.sum(np.abs(psi) ** 2)
        if abs(norm - 1.0) > pa.EPS * 10:
            raise ValueError(f"state is not normalized (sum |psi|^2 = {norm:.15g})")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def normalized(cls, psi, **kwargs) -> "TwoQubitPureState":
        psi = np.asarray(psi, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(psi) ** 2))
        if norm == 0:
            raise ValueError("cannot normalize the zero matrix")
        return cls(psi / norm, **kwargs)

    @property
    def full_rank(self) -> bool:
        return is_full_rank(self)

    @property
    def vector(self) -> np.ndarray:
        """Amplitudes in the |00>, |01>, |10>, |11> order."""
        return self.psi.reshape(4).copy()


def bell_state(k: int) -> TwoQubitPureState:
    """Maximally entangled state with coefficient matrix ``sigma_k / sqrt(2)``.

    ``k = 1`` is the triplet used as the laboratory input.
    """
    if k not in (0, 1, 2, 3):
        raise IndexError(f"Bell index must be 0..3, got {k!r}")
    return TwoQubitPureState(pa.PAULIS[k] / np.sqrt(2))


def is_full_rank(state: TwoQubitPureState) -> bool:
    return bool(abs(np.linalg.det(state.psi)) > state.rank_tolerance)


def apply_local(u, state: TwoQubitPureState, eps: float = pa.EPS) -> TwoQubitPureState:
    """``(U (x) I)|Psi>>``, whose coefficient matrix is ``U @ Psi``."""
    u = pa._check_unitary(u, eps)
    out = u @ state.psi
    # renormalize away rounding so the invariant check stays tight
    out = out / np.sqrt(np.sum(np.abs(out) ** 2))
    return TwoQubitPureState(out, rank_tolerance=state.rank_tolerance)


def correlation_tensor(state: TwoQubitPureState) -> np.ndarray:
    """Pauli correlations ``D[i, j] = <sigma_i (x) sigma_j>`` for i, j in 0..3.

    Computed as ``Tr[Psi^dag sigma_i Psi conj(sigma_j)]``.
    """
    psi = state.psi
    s = pa.PAULIS
    d = np.einsum("ba,ibc,cd,jda->ij", psi.conj(), s, psi, s.conj())
    if np.max(np.abs(d.imag)) > 1e-10:
        raise ValueError("correlation tensor has a non-negligible imaginary part")
    d = np.ascontiguousarray(d.real)
    d[0, 0] = 1.0
    return d


def random_state(rng: np.random.Generator) -> TwoQubitPureState:
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return TwoQubitPureState.normalized(z)
