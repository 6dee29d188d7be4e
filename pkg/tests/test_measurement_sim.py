import math

import numpy as np
import pytest

from paulitomo import entangled_state as es
from paulitomo import measurement_sim as ms
from paulitomo import pauli_algebra as pa
from paulitomo.selftest import plate_probabilities

from .oracles import SIGMA


def projector(axis, outcome):
    return 0.5 * (SIGMA[0] + outcome * SIGMA[axis])


def brute_force_probabilities(psi, setting):
    v = np.asarray(psi).reshape(4)
    a, b = setting
    return np.array(
        [np.vdot(v, np.kron(projector(a, oa), projector(b, ob)) @ v).real for oa, ob in ms.OUTCOMES]
    )


def test_detector_plates():
    assert ms.detector_plate_for(3) is None
    assert ms.detector_plate_for(1) == pa.WavePlateSpec(math.pi, math.pi / 8)
    assert ms.detector_plate_for(2) == pa.WavePlateSpec(math.pi / 2, math.pi / 4)
    with pytest.raises(ValueError):
        ms.detector_plate_for(0)


@pytest.mark.parametrize("axis", [1, 2])
def test_detector_plate_maps_z_row_onto_axis(axis):
    r = pa.rotation_of(pa.waveplate_matrix(ms.detector_plate_for(axis)))
    assert pa.allclose(r[2], np.eye(3)[axis - 1])


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_plate_detector_equivalence(axis, rng):
    for _ in range(20):
        st = es.random_state(rng)
        for other in (1, 2, 3):
            for setting in ((axis, other), (other, axis)):
                direct = ms.outcome_probabilities(st, setting)
                assert pa.allclose(direct, plate_probabilities(st, setting))


@pytest.mark.parametrize(
    "state, setting, expected",
    [
        (es.bell_state(1), (3, 3), (0, 0.5, 0.5, 0)),
        (es.bell_state(1), (1, 1), (0.5, 0, 0, 0.5)),
        (es.TwoQubitPureState(np.array([[1, 0], [0, 0]])), (3, 3), (1, 0, 0, 0)),
    ],
)
def test_outcome_probability_examples(state, setting, expected):
    assert pa.allclose(ms.outcome_probabilities(state, setting), expected)


def test_probabilities_match_projector_oracle(rng):
    for _ in range(100):
        st = es.random_state(rng)
        setting = ms.SETTINGS[rng.integers(9)]
        p = ms.outcome_probabilities(st, setting)
        assert abs(p.sum() - 1) < 1e-12
        assert np.all(p >= 0)
        assert pa.allclose(p, brute_force_probabilities(st.psi, setting))


def test_invalid_setting():
    with pytest.raises(ValueError):
        ms.outcome_probabilities(es.bell_state(0), (0, 3))


def test_sample_setting_examples():
    rng = np.random.default_rng(5)
    assert ms.sample_setting([0.25] * 4, 0, rng) == (0, 0, 0, 0)
    assert ms.sample_setting([1, 0, 0, 0], 1234, rng) == (1234, 0, 0, 0)
    counts = ms.sample_setting([0.25] * 4, 10_000, np.random.default_rng(11))
    assert sum(counts) == 10_000
    bound = 5 * math.sqrt(10_000 * 0.25 * 0.75)
    assert all(abs(n - 2500) <= bound for n in counts)


@pytest.mark.parametrize("bad", [[0.5, 0.5, 0.5, 0.5], [1.2, -0.2, 0, 0], [1, 0, 0], [np.nan, 0, 0, 1]])
def test_sample_setting_rejects_bad_probabilities(bad):
    with pytest.raises(ValueError):
        ms.sample_setting(bad, 10, np.random.default_rng(0))


def test_sample_setting_deterministic():
    a = ms.sample_setting([0.1, 0.2, 0.3, 0.4], 500, np.random.default_rng(3))
    b = ms.sample_setting([0.1, 0.2, 0.3, 0.4], 500, np.random.default_rng(3))
    assert a == b


def test_run_experiment_zero_shots():
    table = ms.run_experiment(es.bell_state(1), 0, seed=1)
    assert np.all(table.counts == 0)


def test_run_experiment_full_efficiency_totals():
    table = ms.run_experiment(es.bell_state(1), 10_000, seed=1)
    assert np.all(table.totals() == 10_000)
    assert table.shots_requested == 10_000
    for _, c in table:
        assert isinstance(c, ms.OutcomeCounts)


def test_efficiency_thins_coincidences():
    q = 0.42
    shots = 100_000
    table = ms.run_experiment(es.bell_state(1), shots, ms.DetectorModel(q), seed=2)
    frac = table.totals() / shots
    sigma = math.sqrt(q**2 * (1 - q**2) / shots)
    assert np.all(np.abs(frac - q**2) < 5 * sigma)
    assert abs(q**2 - 0.1764) < 1e-12


@pytest.mark.parametrize("eff", [0.0, -0.1, 1.01])
def test_detector_model_validation(eff):
    with pytest.raises(ValueError):
        ms.DetectorModel(eff)


def test_run_experiment_deterministic_and_order_independent():
    st = es.random_state(np.random.default_rng(9))
    det = ms.DetectorModel(0.8)
    a = ms.run_experiment(st, 5000, det, seed=123)
    b = ms.run_experiment(st, 5000, det, seed=123, max_workers=4)
    assert np.array_equal(a.counts, b.counts)
    # each setting only depends on its own stream
    for s in reversed(ms.SETTINGS):
        row = ms._sample_one(st, s, 5000, det, 123, 0)
        assert np.array_equal(row, a.counts[s[0] - 1, s[1] - 1])
    c = ms.run_experiment(st, 5000, det, seed=124)
    assert not np.array_equal(a.counts, c.counts)
    d = ms.run_experiment(st, 5000, det, seed=123, stream=1)
    assert not np.array_equal(a.counts, d.counts)


def test_large_seed_accepted():
    ms.run_experiment(es.bell_state(0), 10, seed=2**64 - 1)


@pytest.mark.parametrize("k", range(4))
def test_empirical_correlations_converge(k):
    n = 100_000
    st = es.bell_state(k)
    table = ms.run_experiment(st, n, seed=100 + k)
    d = es.correlation_tensor(st)
    a = np.array([1, 1, -1, -1])
    b = np.array([1, -1, 1, -1])
    for (al, be), c in table:
        s_hat = np.dot(a * b, c) / n
        assert abs(s_hat - d[al, be]) <= 5 / math.sqrt(n)


def test_csv_round_trip_and_schema():
    table = ms.run_experiment(es.bell_state(2), 1000, ms.DetectorModel(0.9), seed=4)
    text = table.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "alpha,beta,outcome_a,outcome_b,count"
    assert len(lines) == 37
    assert lines[1].startswith("x,x,+1,+1,")
    again = ms.CountsTable.from_csv(text)
    assert np.array_equal(again.counts, table.counts)
    assert again.counts.dtype.kind == "i"


def test_csv_accepts_any_row_order_and_float_counts():
    table = ms.expected_counts(es.random_state(np.random.default_rng(1)), 7.5)
    lines = table.to_csv().strip().split("\n")
    shuffled = "\n".join([lines[0]] + lines[1:][::-1]) + "\n"
    again = ms.CountsTable.from_csv(shuffled)
    assert np.array_equal(again.counts, table.counts)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda ls: ["a,b,c,d,e"] + ls[1:],
        lambda ls: ls[:-1],
        lambda ls: ls + [ls[1]],
        lambda ls: ls[:1] + ["q,x,+1,+1,3"] + ls[2:],
        lambda ls: ls[:1] + ["x,x,+1,+1,-3"] + ls[2:],
        lambda ls: ls[:1] + ["x,x,+2,+1,3"] + ls[2:],
    ],
)
def test_csv_rejects_malformed(mutate):
    lines = ms.run_experiment(es.bell_state(0), 10, seed=0).to_csv().strip().split("\n")
    with pytest.raises(ValueError):
        ms.CountsTable.from_csv("\n".join(mutate(lines)) + "\n")


def test_counts_table_validation():
    with pytest.raises(ValueError):
        ms.CountsTable(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        ms.CountsTable(-np.ones((3, 3, 4)))
