"""Pauli matrices, wave-plate unitaries and the Bloch rotations they induce.

Matrices are plain ``numpy`` arrays: complex ``(2, 2)`` for qubit operators
and real ``(3, 3)`` for rotations. The computational basis is
``|0> = h`` (horizontal polarization), ``|1> = v`` (vertical).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

EPS = 1e-12

PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

AXES = {"x": 1, "y": 2, "z": 3}
AXIS_NAMES = {1: "x", 2: "y", 3: "z"}


class NotUnitaryError(ValueError):
    pass


@dataclass(frozen=True)
class WavePlateSpec:
    """A birefringent plate with retardation ``phi`` and orientation ``theta`` (radians)."""

    phi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise ValueError(f"wave-plate angles must be finite, got {self}")

    @classmethod
    def from_pi_units(cls, phi_over_pi: float, theta_over_pi: float) -> "WavePlateSpec":
        return cls(phi_over_pi * math.pi, theta_over_pi * math.pi)


DeviceElement = Union[WavePlateSpec, np.ndarray]
DeviceSpec = Sequence[DeviceElement]


def pauli(i: int) -> np.ndarray:
    """Return sigma_i for ``i`` in 0..3 (sigma_0 is the identity)."""
    if i not in (0, 1, 2, 3):
        raise IndexError(f"Pauli index must be 0..3, got {i!r}")
    return PAULIS[i].copy()


def allclose(a, b, eps: float = EPS) -> bool:
    return bool(np.allclose(a, b, rtol=0.0, atol=eps))


def is_unitary(u, eps: float = EPS) -> bool:
    u = np.asarray(u)
    if u.shape != (2, 2) or not np.all(np.isfinite(u)):
        return False
    return allclose(u.conj().T @ u, np.eye(2), eps)


def _check_unitary(u, eps: float, what: str = "matrix") -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, eps):
        raise NotUnitaryError(f"{what} is not unitary within {eps:g}: {u!r}")
    return u


def waveplate_matrix(spec: WavePlateSpec) -> np.ndarray:
    """Unitary of a wave-plate acting on the (h, v) amplitudes.

    ``W = rot(theta) @ diag(1, exp(i phi)) @ rot(theta).T``, written out as
    ``[[z+ + c z-, s z-], [s z-, z+ - c z-]]`` with ``s = sin 2theta``,
    ``c = cos 2theta`` and ``z± = (1 ± exp(i phi)) / 2``.
    """
    e = np.exp(1j * spec.phi)
    zp = 0.5 * (1 + e)
    zm = 0.5 * (1 - e)
    s = math.sin(2 * spec.theta)
    c = math.cos(2 * spec.theta)
    return np.array([[zp + c * zm, s * zm], [s * zm, zp - c * zm]], dtype=complex)


def compose_device(spec: DeviceSpec, eps: float = EPS) -> np.ndarray:
    """Total unitary of an optical cascade; ``spec[0]`` is traversed first."""
    u = np.eye(2, dtype=complex)
    for k, element in enumerate(spec):
        if isinstance(element, WavePlateSpec):
            m = waveplate_matrix(element)
        else:
            m = _check_unitary(element, eps, what=f"device element {k}")
        u = m @ u
    return u


def rotation_of(u, eps: float = EPS) -> np.ndarray:
    """Bloch rotation ``R`` defined by ``U^dag sigma_a U = sum_b R[a, b] sigma_b``.

    Indices run over x, y, z. ``R(U @ V) == R(U) @ R(V)``.
    """
    u = _check_unitary(u, eps)
    s = PAULIS[1:]
    conj = np.einsum("ji,ajk,kl->ail", u.conj(), s, u)
    r = 0.5 * np.einsum("aij,bji->ab", conj, s)
    if np.max(np.abs(r.imag)) > max(eps, 1e-10):
        raise NotUnitaryError("rotation has a non-negligible imaginary part")
    return np.ascontiguousarray(r.real)


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
