"""Entanglement-assisted Pauli tomography of single-qubit devices.

One half of a two-photon entangled state passes through the device under
test; joint Pauli measurements on both halves determine the output state,
and with it the device's unitary matrix.
"""
from .entangled_state import (
    TwoQubitPureState,
    apply_local,
    bell_state,
    correlation_tensor,
    is_full_rank,
)
from .kernels import BACKEND
from .measurement_sim import (
    CountsTable,
    DetectorModel,
    OutcomeCounts,
    detector_plate_for,
    expected_counts,
    outcome_probabilities,
    run_experiment,
    sample_setting,
)
from .pauli_algebra import WavePlateSpec, compose_device, pauli, rotation_of, waveplate_matrix
from .tomography import (
    AUTO,
    CorrelationEstimate,
    StateEstimate,
    TomographyError,
    UnitaryEstimate,
    bootstrap_variances,
    estimate_correlations,
    estimate_unitary,
    gauge_fidelity,
    q_tensor,
    reconstruct_state,
    reconstruct_unitary,
)

__version__ = "0.1.0"
