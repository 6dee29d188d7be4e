import math

import numpy as np
import pytest

from paulitomo import entangled_state as es
from paulitomo import measurement_sim as ms
from paulitomo import pauli_algebra as pa
from paulitomo import tomography as tomo

from .oracles import SIGMA

PAIRS = [(0, 0), (0, 1), (1, 0), (1, 1)]
SINGLE_PLATE = pa.WavePlateSpec.from_pi_units(0.45, -0.138)


def exact_state(state, reference=tomo.AUTO):
    return tomo.reconstruct_state(tomo.analytic_correlations(state), reference)


def exact_unitary(u, state):
    return tomo.reconstruct_unitary(exact_state(state), exact_state(es.apply_local(u, state)))


def same_up_to_phase(a, b, tol):
    return tomo.phase_distance(a, b) < tol


def test_q_tensor_examples():
    q = tomo.q_tensor(0, 1, (0, 1))
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 0], expected[0, 3], expected[3, 0], expected[3, 3] = 1, -1, 1, -1
    assert pa.allclose(q, expected)
    q = tomo.q_tensor(1, 1, (0, 1))
    expected = np.zeros((4, 4), dtype=complex)
    expected[1, 0], expected[1, 3], expected[2, 0], expected[2, 3] = 1, -1, 1j, -1j
    assert pa.allclose(q, expected)


def test_q_tensor_validates_indices():
    with pytest.raises(ValueError):
        tomo.q_tensor(2, 0)
    with pytest.raises(ValueError):
        tomo.q_tensor(0, 0, (0, 3))


def test_q_table_matches_q_tensor():
    t = tomo.q_table()
    for r in PAIRS:
        for n, m in PAIRS:
            assert pa.allclose(t[2 * r[0] + r[1], n, m], tomo.q_tensor(n, m, r))


def test_expansion_completeness(rng):
    # 1/4 sum_ij Q_ij(nm) <sigma_i sigma_j> == <<Psi|r><nm|Psi>>, the right side by
    # brute force on the 4-vector
    for _ in range(50):
        st = es.random_state(rng)
        d = es.correlation_tensor(st)
        v = st.vector
        for r in PAIRS:
            for n, m in PAIRS:
                op = np.outer(np.eye(4)[2 * r[0] + r[1]], np.eye(4)[2 * n + m])
                rhs = np.vdot(v, op @ v)
                lhs = 0.25 * np.sum(tomo.q_tensor(n, m, r) * d)
                assert abs(lhs - rhs) < 1e-12


def test_pseudo_counts_reproduce_correlation_tensor(backend, rng):
    for st in [es.bell_state(1)] + [es.random_state(rng) for _ in range(10)]:
        corr = tomo.estimate_correlations(ms.expected_counts(st, 1000.0))
        assert pa.allclose(corr.values, es.correlation_tensor(st))


def test_product_state_counts():
    table = ms.run_experiment(es.TwoQubitPureState(np.array([[1, 0], [0, 0]])), 500, seed=0)
    v = tomo.estimate_correlations(table).values
    assert v[3, 3] == 1 and v[3, 0] == 1 and v[0, 3] == 1


def test_singlet_anticorrelation():
    table = ms.run_experiment(es.bell_state(2), 2000, seed=0)
    v = tomo.estimate_correlations(table).values
    for a in (1, 2, 3):
        assert v[a, a] == -1


def test_standard_errors_binomial(backend):
    counts = np.zeros((3, 3, 4))
    counts[...] = [30, 10, 20, 40]  # s_ab = (30 - 10 - 20 + 40) / 100 = 0.4
    est = tomo.estimate_correlations(ms.CountsTable(counts))
    assert est.values[1, 2] == pytest.approx(0.4)
    assert est.std_errors[1, 2] == pytest.approx(math.sqrt((1 - 0.16) / 100))
    # marginal s_a = (40 - 60) / 100 = -0.2, pooled over 300 events
    assert est.values[2, 0] == pytest.approx(-0.2)
    assert est.std_errors[2, 0] == pytest.approx(math.sqrt((1 - 0.04) / 300))
    assert est.values[0, 0] == 1 and est.std_errors[0, 0] == 0


def test_marginals_are_count_weighted():
    counts = np.zeros((3, 3, 4))
    counts[0, 0] = [10, 0, 0, 0]  # s_x = +1 over 10 events
    counts[0, 1] = [0, 0, 30, 0]  # s_x = -1 over 30 events
    counts[0, 2] = [0, 0, 0, 60]  # s_x = -1 over 60 events
    counts[1:, :] = 1
    v = tomo.estimate_correlations(ms.CountsTable(counts)).values
    assert v[1, 0] == pytest.approx((10 - 30 - 60) / 100)


def test_empty_setting_is_named():
    counts = np.ones((3, 3, 4))
    counts[1, 2] = 0
    with pytest.raises(tomo.EmptySettingError, match=r"\(y, z\)"):
        tomo.estimate_correlations(ms.CountsTable(counts))


def test_reconstruct_state_lab_input():
    est = exact_state(es.bell_state(1), (0, 1))
    assert pa.allclose(est.psi_hat, SIGMA[1] / math.sqrt(2))
    assert est.p_hat == pytest.approx(0.5, abs=1e-12)
    assert est.psi_hat[0, 1] == pytest.approx(1 / math.sqrt(2))


def test_reconstruct_state_zero_reference_probability():
    with pytest.raises(tomo.LowReferenceProbabilityError):
        exact_state(es.bell_state(0), (0, 1))
    est = exact_state(es.bell_state(0), tomo.AUTO)
    assert est.reference in ((0, 0), (1, 1))
    assert pa.allclose(est.psi_hat, np.eye(2) / math.sqrt(2))


def test_reconstruct_state_explicit_reference_00():
    est = exact_state(es.bell_state(0), (0, 0))
    assert pa.allclose(est.psi_hat, np.eye(2) / math.sqrt(2))


def test_reconstruct_state_bad_reference():
    with pytest.raises(ValueError):
        exact_state(es.bell_state(0), "first")


def test_exact_state_round_trip(backend, rng):
    for _ in range(50):
        st = es.random_state(rng)
        est = exact_state(st)
        assert same_up_to_phase(est.psi_hat, st.psi, 1e-10)
        r = est.reference
        assert est.psi_hat[r].imag == 0 and est.psi_hat[r].real >= 0


def test_reference_independence(rng):
    for _ in range(50):
        st = es.random_state(rng)
        p = tomo.reference_probabilities(tomo.analytic_correlations(st))
        assert pa.allclose(p, np.abs(st.psi) ** 2)
        ests = [exact_state(st, r) for r in PAIRS if p[r] > 0.05]
        for e in ests[1:]:
            assert same_up_to_phase(e.psi_hat, ests[0].psi_hat, 1e-9)


def test_reconstruct_unitary_identity():
    est = exact_state(es.bell_state(1))
    u = tomo.reconstruct_unitary(est, est)
    assert pa.allclose(u.u_hat, np.eye(2))


def test_reconstruct_unitary_diagonal_plate():
    u = pa.waveplate_matrix(pa.WavePlateSpec(math.pi, math.pi / 8))
    est = exact_unitary(u, es.bell_state(1))
    assert same_up_to_phase(est.u_hat, np.array([[1, 1], [1, -1]]) / math.sqrt(2), 1e-12)


def test_reconstruct_unitary_single_plate_plate():
    u = pa.waveplate_matrix(SINGLE_PLATE)
    est = exact_unitary(u, es.bell_state(1))
    assert same_up_to_phase(est.u_hat, u, 1e-12)
    assert tomo.gauge_fidelity(u, est.u_hat) == pytest.approx(1.0, abs=1e-12)
    i, j = est.gauge_index
    assert est.u_hat[i, j].imag == 0 and est.u_hat[i, j].real == np.max(np.abs(est.u_hat))
    assert pa.is_unitary(est.u_unitary, 1e-10)


def test_exact_unitary_round_trip(backend, rng):
    for _ in range(50):
        st = es.random_state(rng)
        u = pa.random_unitary(rng)
        est = exact_unitary(u, st)
        assert tomo.gauge_fidelity(u, est.u_hat) >= 1 - 1e-10


def test_singular_input_rejected():
    product = tomo.StateEstimate(np.array([[1, 0], [0, 0]], dtype=complex), (0, 0), 1.0)
    with pytest.raises(tomo.SingularStateError, match="full-rank"):
        tomo.reconstruct_unitary(product, product)


def test_polar_projection_is_closer(rng):
    for _ in range(20):
        u = pa.random_unitary(rng)
        e = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        noisy = u + 0.05 * e
        proj = tomo.nearest_unitary(noisy)
        assert pa.is_unitary(proj, 1e-10)
        assert tomo.phase_distance(proj, u) <= tomo.phase_distance(noisy, u) + 1e-9


def test_finite_statistics_state_estimate_invariants():
    st = es.bell_state(1)
    est = tomo.reconstruct_state(tomo.estimate_correlations(ms.run_experiment(st, 5000, seed=8)))
    assert abs(np.linalg.norm(est.psi_hat) - 1) <= 0.1
    r = est.reference
    assert est.psi_hat[r].imag == 0 and est.psi_hat[r].real >= 0


def test_gauge_fidelity_examples(rng):
    u = pa.random_unitary(rng)
    assert tomo.gauge_fidelity(u, u) == pytest.approx(1.0, abs=1e-15)
    for g in (0.3, 2.0, -1.1):
        assert tomo.gauge_fidelity(u, np.exp(1j * g) * u) == pytest.approx(1.0, abs=1e-15)
        assert tomo.gauge_fidelity(np.exp(1j * g) * u, u) == pytest.approx(1.0, abs=1e-15)
    assert tomo.gauge_fidelity(SIGMA[1], SIGMA[3]) == 0
    with pytest.raises(ValueError):
        tomo.gauge_fidelity(np.zeros((2, 2)), u)


def _datasets(u, shots, seed, state=None):
    state = state or es.bell_state(1)
    a = ms.run_experiment(state, shots, seed=seed, stream=0)
    b = ms.run_experiment(es.apply_local(u, state), shots, seed=seed, stream=1)
    return a, b


def test_bootstrap_tiny_for_huge_pseudo_counts():
    u = pa.waveplate_matrix(SINGLE_PLATE)
    st = es.bell_state(1)
    a = ms.expected_counts(st, 1e8)
    b = ms.expected_counts(es.apply_local(u, st), 1e8)
    var = tomo.bootstrap_variances(a, 50, seed=1, output_counts=b)
    assert var.shape == (2, 2, 2)
    assert np.all(var < 1e-6)
    var_state = tomo.bootstrap_variances(a, 50, seed=1)
    assert np.all(var_state < 1e-6)


def test_bootstrap_deterministic(backend):
    a, b = _datasets(pa.waveplate_matrix(SINGLE_PLATE), 2000, seed=3)
    v1 = tomo.bootstrap_variances(a, 40, seed=9, output_counts=b)
    v2 = tomo.bootstrap_variances(a, 40, seed=9, output_counts=b)
    assert np.array_equal(v1, v2)
    v3 = tomo.bootstrap_variances(a, 40, seed=10, output_counts=b)
    assert not np.array_equal(v1, v3)


def test_bootstrap_gauge_element_is_fixed():
    u = pa.waveplate_matrix(SINGLE_PLATE)
    a, b = _datasets(u, 2000, seed=3)
    _, _, est = tomo.estimate_unitary(a, b)
    var = tomo.bootstrap_variances(a, 40, seed=9, output_counts=b)
    i, j = est.gauge_index
    assert var[i, j, 1] == 0
    assert np.all(np.delete(var.reshape(-1), 2 * (2 * i + j) + 1) > 0)


@pytest.mark.slow
def test_bootstrap_std_scales_inverse_sqrt():
    u = pa.waveplate_matrix(SINGLE_PLATE)
    stds = {}
    for shots in (2000, 8000):
        per_seed = []
        for seed in range(100):
            a, b = _datasets(u, shots, seed)
            per_seed.append(np.sqrt(tomo.bootstrap_variances(a, 50, seed=seed, output_counts=b)))
        stds[shots] = np.mean(per_seed, axis=0)
    _, _, est = tomo.estimate_unitary(*_datasets(u, 2000, 0))
    mask = np.ones((2, 2, 2), bool)
    mask[est.gauge_index + (1,)] = False
    ratio = stds[2000][mask] / stds[8000][mask]
    assert np.all(ratio > 2 / 1.5) and np.all(ratio < 2 * 1.5)


def test_bootstrap_validation():
    a, b = _datasets(np.eye(2), 100, seed=0)
    with pytest.raises(ValueError):
        tomo.bootstrap_variances(a, 1)
    empty = ms.CountsTable(np.zeros((3, 3, 4)))
    with pytest.raises(tomo.EmptySettingError):
        tomo.bootstrap_variances(empty, 10)
    with pytest.raises(tomo.EmptySettingError):
        tomo.bootstrap_variances(a, 10, output_counts=empty)


def test_estimate_unitary_reports_empty_dataset():
    a, _ = _datasets(np.eye(2), 100, seed=0)
    empty = ms.CountsTable(np.zeros((3, 3, 4)))
    with pytest.raises(tomo.EmptySettingError, match="output counts"):
        tomo.estimate_unitary(a, empty)
