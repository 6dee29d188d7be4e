"""Fast deterministic consistency checks behind ``paulitomo selftest``."""
from __future__ import annotations

import math
import sys
from contextlib import contextmanager

import numpy as np

from . import entangled_state as es
from . import measurement_sim as ms
from . import pauli_algebra as pa
from . import tomography as tomo

BELL_DIAGONALS = (
    (1, 1, -1, 1),
    (1, 1, 1, -1),
    (1, -1, -1, -1),
    (1, -1, 1, 1),
)


def half_wave_rotation(theta):
    c4, s4 = math.cos(4 * theta), math.sin(4 * theta)
    return np.array([[-c4, 0, s4], [0, -1, 0], [s4, 0, c4]])


def random_cascade(rng, max_len=3):
    n = int(rng.integers(1, max_len + 1))
    return [pa.WavePlateSpec(rng.uniform(-2 * math.pi, 2 * math.pi), rng.uniform(-math.pi, math.pi)) for _ in range(n)]


def check_diagonal_plate():
    w = pa.waveplate_matrix(pa.WavePlateSpec(math.pi, math.pi / 8))
    return pa.allclose(w, np.array([[1, 1], [1, -1]]) / math.sqrt(2))


def check_half_wave_matrix():
    rng = np.random.default_rng(12)
    for theta in rng.uniform(-math.pi, math.pi, 20):
        c, s = math.cos(2 * theta), math.sin(2 * theta)
        if not pa.allclose(pa.waveplate_matrix(pa.WavePlateSpec(math.pi, theta)), [[c, s], [s, -c]]):
            return False
    return True


def check_half_wave_rotation():
    rng = np.random.default_rng(13)
    for theta in rng.uniform(-math.pi, math.pi, 20):
        r = pa.rotation_of(pa.waveplate_matrix(pa.WavePlateSpec(math.pi, theta)))
        if not pa.allclose(r, half_wave_rotation(theta)):
            return False
    return True


def plate_probabilities(state, setting):
    """Outcome probabilities with sigma_x/sigma_y realised as plate + sigma_z."""
    a, b = setting
    psi = state.psi
    pa_plate = ms.detector_plate_for(a)
    pb_plate = ms.detector_plate_for(b)
    if pa_plate is not None:
        psi = pa.waveplate_matrix(pa_plate) @ psi
    if pb_plate is not None:
        psi = psi @ pa.waveplate_matrix(pb_plate).T
    return (np.abs(psi) ** 2).reshape(4)


def check_detector_plates():
    rng = np.random.default_rng(14)
    for _ in range(20):
        state = es.random_state(rng)
        for setting in ms.SETTINGS:
            if not pa.allclose(ms.outcome_probabilities(state, setting), plate_probabilities(state, setting)):
                return False
    return True


def check_bell_diagonals():
    for k, diag in enumerate(BELL_DIAGONALS):
        if not pa.allclose(es.correlation_tensor(es.bell_state(k)), np.diag(diag)):
            return False
    return True


def check_exact_round_trip():
    rng = np.random.default_rng(15)
    for _ in range(50):
        cascade = random_cascade(rng)
        u = pa.compose_device(cascade)
        for k in range(4):
            state = es.bell_state(k)
            psi_in = tomo.reconstruct_state(tomo.analytic_correlations(state))
            psi_out = tomo.reconstruct_state(tomo.analytic_correlations(es.apply_local(u, state)))
            est = tomo.reconstruct_unitary(psi_in, psi_out)
            if tomo.gauge_fidelity(u, est.u_hat) < 1 - 1e-9:
                return False
    return True


def check_expansion_completeness():
    rng = np.random.default_rng(16)
    for _ in range(20):
        state = es.random_state(rng)
        d = es.correlation_tensor(state)
        for r in ((0, 0), (0, 1), (1, 0), (1, 1)):
            for n in (0, 1):
                for m in (0, 1):
                    lhs = 0.25 * np.sum(tomo.q_tensor(n, m, r) * d)
                    rhs = np.conj(state.psi[r]) * state.psi[n, m]
                    if abs(lhs - rhs) > 1e-12:
                        return False
    return True


CHECKS = (
    ("diagonal-polarization plate (pi, pi/8)", check_diagonal_plate),
    ("half-wave plate matrix", check_half_wave_matrix),
    ("half-wave plate Bloch rotation", check_half_wave_rotation),
    ("sigma_x / sigma_y detectors via plates", check_detector_plates),
    ("Bell-state correlation diagonals", check_bell_diagonals),
    ("Pauli expansion completeness", check_expansion_completeness),
    ("exact round trip, 4 Bell inputs x 50 cascades", check_exact_round_trip),
)


@contextmanager
def patched_paulis(table):
    saved = pa.PAULIS.copy()
    pa.PAULIS[...] = np.asarray(table, dtype=complex)
    try:
        yield
    finally:
        pa.PAULIS[...] = saved


def selftest(out=None, pauli_table=None) -> int:
    """Run every check, print one line each, return 0 if all pass else 4.

    ``pauli_table`` temporarily replaces the Pauli matrices (a test hook for
    verifying that corruption is detected).
    """
    out = out or sys.stdout
    failures = []
    ctx = patched_paulis(pauli_table) if pauli_table is not None else _null()
    with ctx:
        for name, check in CHECKS:
            try:
                ok = bool(check())
            except Exception as exc:  # a crash is a failure, not an abort
                ok = False
                name = f"{name} ({type(exc).__name__}: {exc})"
            print(f"{'PASS' if ok else 'FAIL'}  {name}", file=out)
            if not ok:
                failures.append(name)
    if failures:
        print(f"{len(failures)} check(s) failed", file=out)
        return 4
    print(f"all {len(CHECKS)} checks passed", file=out)
    return 0


@contextmanager
def _null():
    yield
