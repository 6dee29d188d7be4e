"""Estimators: counts -> Pauli correlations -> state matrices -> device unitary.

The state matrix is recovered element by element from the Pauli expansion of
``|r><nm|`` (``r`` a reference basis pair), normalized by the reference
probability ``p = |Psi_r|^2``. The overall phase is not observable; every
state estimate is gauge fixed so that its reference entry is real and
non-negative.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from . import kernels
from . import pauli_algebra as pa
from .entangled_state import RANK_TOLERANCE, TwoQubitPureState, correlation_tensor
from .measurement_sim import SETTINGS, CountsTable

AUTO = "auto"
P_MIN = 1e-3
DEFAULT_RESAMPLES = 200
# kept apart from the streams used to simulate the input/output datasets
BOOTSTRAP_STREAMS = (2, 3)

Reference = Union[str, Tuple[int, int]]


class TomographyError(ValueError):
    """The data do not support a reconstruction."""


class EmptySettingError(TomographyError):
    pass


class LowReferenceProbabilityError(TomographyError):
    pass


class SingularStateError(TomographyError):
    pass


@dataclass(frozen=True, eq=False)
class CorrelationEstimate:
    values: np.ndarray
    std_errors: np.ndarray
    shots: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class StateEstimate:
    psi_hat: np.ndarray
    reference: Tuple[int, int]
    p_hat: float


@dataclass(frozen=True, eq=False)
class UnitaryEstimate:
    u_hat: np.ndarray
    u_unitary: np.ndarray
    element_variances: Optional[np.ndarray] = None  # (2, 2, 2): [n, m, (re, im)]
    gauge_index: Tuple[int, int] = (0, 0)
    gauge_note: str = ""

    @property
    def element_std(self) -> Optional[np.ndarray]:
        if self.element_variances is None:
            return None
        return np.sqrt(self.element_variances)


def q_tensor(n: int, m: int, reference: Tuple[int, int] = (0, 1)) -> np.ndarray:
    """Expansion coefficients ``Q[i, j] = <n|sigma_i|r1> <m|sigma_j|r2>``.

    With them ``<<Psi|r><nm|Psi>> = 1/4 sum_ij Q[i, j] <sigma_i (x) sigma_j>``.
    """
    r1, r2 = _check_pair(reference, "reference")
    n, m = _check_pair((n, m), "basis pair")
    s = pa.PAULIS
    return np.outer(s[:, n, r1], s[:, m, r2])


def q_table() -> np.ndarray:
    """All expansion tensors, indexed ``[2 * r1 + r2, n, m, i, j]``."""
    s = pa.PAULIS
    # s[i, n, r] = <n|sigma_i|r>
    t = np.einsum("inr,jms->rsnmij", s, s)
    return np.ascontiguousarray(t.reshape(4, 2, 2, 4, 4))


def _check_pair(pair, what) -> Tuple[int, int]:
    try:
        a, b = (int(x) for x in pair)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be a pair of basis indices, got {pair!r}") from None
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError(f"{what} indices must be 0 or 1, got {pair!r}")
    return a, b


def _reference_code(reference: Reference) -> int:
    if isinstance(reference, str):
        if reference.lower() != AUTO:
            raise ValueError(f"reference must be 'auto' or a basis pair, got {reference!r}")
        return -1
    r1, r2 = _check_pair(reference, "reference")
    return 2 * r1 + r2


def _check_totals(counts: CountsTable, what: str = "counts") -> None:
    totals = counts.totals()
    for a, b in SETTINGS:
        if totals[a - 1, b - 1] <= 0:
            raise EmptySettingError(
                f"{what}: setting ({pa.AXIS_NAMES[a]}, {pa.AXIS_NAMES[b]}) has no coincidences"
            )


def estimate_correlations(counts: CountsTable) -> CorrelationEstimate:
    """Sample averages of ``s_i s_j`` with binomial standard errors.

    Single-beam marginals are pooled over the three settings sharing the axis;
    ``s_0`` is +1 on every coincidence.
    """
    _check_totals(counts)
    vals, err = kernels.correlations(np.asarray(counts.counts, dtype=float)[None])
    return CorrelationEstimate(vals[0], err[0], shots=counts.totals())


def analytic_correlations(state: TwoQubitPureState) -> CorrelationEstimate:
    return CorrelationEstimate(correlation_tensor(state), np.zeros((4, 4)))


def reference_probabilities(corr: CorrelationEstimate) -> np.ndarray:
    """Estimated ``|Psi_r|^2`` for the four basis pairs, as a 2x2 array."""
    t = q_table()
    diag = t[np.arange(4), [0, 0, 1, 1], [0, 1, 0, 1]].real
    return (0.25 * np.einsum("rij,ij->r", diag, corr.values)).reshape(2, 2)


def reconstruct_state(
    corr: CorrelationEstimate, reference: Reference = AUTO, p_min: float = P_MIN
) -> StateEstimate:
    """Estimate the coefficient matrix of the measured two-beam state.

    ``reference='auto'`` picks the basis pair with the largest estimated
    reference probability; an explicit ``(r1, r2)`` reproduces a fixed
    normalization choice and fails if its probability is at most ``p_min``.
    """
    code = _reference_code(reference)
    psi, p, ref = kernels.states(np.asarray(corr.values, dtype=float)[None], q_table(), code)
    p_hat = float(p[0])
    r = int(ref[0])
    pair = (r // 2, r % 2)
    if not p_hat > p_min:
        hint = "" if code < 0 else "; try reference='auto'"
        raise LowReferenceProbabilityError(
            f"reference probability for |{pair[0]}{pair[1]}> is {p_hat:.3g} <= {p_min:g}{hint}"
        )
    return StateEstimate(psi[0], pair, p_hat)


def nearest_unitary(a) -> np.ndarray:
    """Unitary factor of the polar decomposition ``a = W P``."""
    u, _, vh = np.linalg.svd(np.asarray(a, dtype=complex))
    return u @ vh


def fix_gauge(u, index: Optional[Tuple[int, int]] = None):
    """Rotate the global phase so ``u[index]`` is real and non-negative.

    ``index`` defaults to the largest-magnitude element. Works on a single
    matrix or a stack ``(..., 2, 2)``. Returns ``(u_fixed, index)``.
    """
    u = np.asarray(u, dtype=complex)
    if index is None:
        flat = np.abs(u.reshape(-1, 4)).sum(axis=0) if u.ndim > 2 else np.abs(u).ravel()
        k = int(np.argmax(flat))
        index = (k // 2, k % 2)
    el = u[..., index[0], index[1]]
    mag = np.abs(el)
    phase = np.where(mag > 0, np.conj(el) / np.where(mag > 0, mag, 1.0), 1.0)
    fixed = u * phase[..., None, None]
    fixed[..., index[0], index[1]] = np.abs(fixed[..., index[0], index[1]])
    return fixed, index


def reconstruct_unitary(
    input_est: StateEstimate,
    output_est: StateEstimate,
    rank_tolerance: float = RANK_TOLERANCE,
) -> UnitaryEstimate:
    """Device matrix ``U = (U Psi) @ inv(Psi)`` from the two state estimates.

    The raw product is not forced to be unitary; its polar projection is
    reported alongside. Both are determined up to one global phase.
    """
    u, det = kernels.unitaries(output_est.psi_hat[None], input_est.psi_hat[None])
    if not abs(det[0]) > rank_tolerance:
        raise SingularStateError(
            f"input state estimate is singular (|det| = {abs(det[0]):.3g}); "
            "the entangled input must be full-rank"
        )
    u_hat, idx = fix_gauge(u[0])
    u_unit, _ = fix_gauge(nearest_unitary(u_hat), idx)
    note = (
        f"global phase fixed so U[{idx[0]}][{idx[1]}] is real and non-negative; "
        "the overall phase is not measurable"
    )
    return UnitaryEstimate(u_hat, u_unit, None, idx, note)


def estimate_unitary(
    input_counts: CountsTable,
    output_counts: CountsTable,
    reference: Reference = AUTO,
    p_min: float = P_MIN,
    rank_tolerance: float = RANK_TOLERANCE,
) -> Tuple[StateEstimate, StateEstimate, UnitaryEstimate]:
    """Full point estimate from the two datasets."""
    _check_totals(input_counts, "input counts")
    _check_totals(output_counts, "output counts")
    psi_in = reconstruct_state(estimate_correlations(input_counts), reference, p_min)
    psi_out = reconstruct_state(estimate_correlations(output_counts), reference, p_min)
    return psi_in, psi_out, reconstruct_unitary(psi_in, psi_out, rank_tolerance)


def resample_counts(counts: CountsTable, resamples: int, seed: int, stream: int = 0) -> np.ndarray:
    """Multinomial bootstrap replicas of a table, shape ``(resamples, 3, 3, 4)``.

    Each setting keeps its (rounded) total and is redrawn from its observed
    frequencies with a generator derived from ``(seed, stream, alpha, beta)``.
    """
    c = np.asarray(counts.counts, dtype=float)
    out = np.empty((resamples, 3, 3, 4), dtype=np.int64)
    for a, b in SETTINGS:
        row = c[a - 1, b - 1]
        total = row.sum()
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, a, b)))
        out[:, a - 1, b - 1] = rng.multinomial(int(round(total)), row / total, size=resamples)
    return out


def _batch_states(replicas, reference_code):
    vals, _ = kernels.correlations(replicas)
    psi, p, _ = kernels.states(vals, q_table(), reference_code)
    return psi, p


def bootstrap_samples(
    counts: CountsTable,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    *,
    output_counts: Optional[CountsTable] = None,
    reference: Reference = AUTO,
    p_min: float = P_MIN,
    gauge_index: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """Bootstrap replicas of the state estimate, or of the unitary estimate
    when ``output_counts`` is given. Replicas that fail (reference probability
    at most ``p_min`` or singular input) are dropped.

    The reference pair of each dataset is frozen to the one chosen by the
    point estimate, and unitary replicas are put in the point estimate's gauge
    (or ``gauge_index`` when given).
    """
    if resamples < 2:
        raise ValueError(f"need at least 2 resamples, got {resamples}")
    _check_totals(counts, "input counts")
    est_in = reconstruct_state(estimate_correlations(counts), reference, p_min)
    code_in = 2 * est_in.reference[0] + est_in.reference[1]
    psi_in, p_in = _batch_states(resample_counts(counts, resamples, seed, BOOTSTRAP_STREAMS[0]), code_in)
    ok = p_in > p_min
    if output_counts is None:
        samples = psi_in[ok]
    else:
        _check_totals(output_counts, "output counts")
        est_out = reconstruct_state(estimate_correlations(output_counts), reference, p_min)
        code_out = 2 * est_out.reference[0] + est_out.reference[1]
        psi_out, p_out = _batch_states(resample_counts(output_counts, resamples, seed, BOOTSTRAP_STREAMS[1]), code_out)
        ok &= p_out > p_min
        u, det = kernels.unitaries(psi_out, psi_in)
        ok &= np.abs(det) > RANK_TOLERANCE
        if gauge_index is None:
            gauge_index = reconstruct_unitary(est_in, est_out).gauge_index
        samples, _ = fix_gauge(u[ok], gauge_index)
    if len(samples) < 2:
        raise TomographyError("fewer than 2 bootstrap replicas could be reconstructed")
    return samples


def bootstrap_variances(
    counts: CountsTable,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    *,
    output_counts: Optional[CountsTable] = None,
    reference: Reference = AUTO,
    p_min: float = P_MIN,
) -> np.ndarray:
    """Per-element sample variances of the real and imaginary parts.

    Returns a ``(2, 2, 2)`` array indexed ``[n, m, (re, im)]``.
    """
    samples = bootstrap_samples(
        counts, resamples, seed, output_counts=output_counts, reference=reference, p_min=p_min
    )
    return np.stack([samples.real.var(axis=0, ddof=1), samples.imag.var(axis=0, ddof=1)], axis=-1)


def with_variances(est: UnitaryEstimate, variances: np.ndarray) -> UnitaryEstimate:
    return replace(est, element_variances=np.asarray(variances, dtype=float))


def gauge_fidelity(reference_u, estimate_u) -> float:
    """Phase-insensitive overlap ``|Tr(A^dag B)| / (|A|_F |B|_F)`` in [0, 1]."""
    a = np.asarray(reference_u, dtype=complex)
    b = np.asarray(estimate_u, dtype=complex)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("gauge_fidelity is undefined for a zero matrix")
    f = abs(np.vdot(a, b)) / (na * nb)
    return float(min(max(f, 0.0), 1.0))


def align_phase(u, target) -> np.ndarray:
    """Multiply ``u`` by the global phase that best matches ``target``."""
    u = np.asarray(u, dtype=complex)
    ov = np.vdot(u, target)
    if ov == 0:
        return u.copy()
    return u * (ov / abs(ov))


def phase_distance(a, b) -> float:
    """Frobenius distance minimized over a global phase on ``a``."""
    return float(np.linalg.norm(align_phase(a, b) - np.asarray(b)))


def infidelity(reference_u, estimate_u) -> float:
    return 1.0 - gauge_fidelity(reference_u, estimate_u)

