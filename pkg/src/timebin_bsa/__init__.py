"""Linear-optics simulation of a three-state Bell analyzer for time-bin qubits."""

__version__ = "0.1.0"

from .bell import (
    Analyzer,
    AnalyzerMode,
    BellKind,
    Classification,
    CoincidenceOutcome,
    all_outcomes,
    average_success,
    bell_state,
    classify,
    correction_unitary,
    outcome_distribution,
    success_rate,
)
from .detection import CountRecord, DetectorModel, estimate_visibility, net_visibility, sample_outcomes
from .fock import Mode, ModeTransform, PhotonicState, apply_transform, make_state, measure_number, superpose
from .optics import beamsplitter, bsa_interferometer, delay_line, phase_shift, qubit_analyzer
from .sources import DelayModel, SourceSpec, antidip_scan, spdc_state
from .teleportation import (
    ExperimentPhases,
    QubitState,
    apply_correction,
    build_joint_state,
    conditional_bob_state,
    fidelity,
    fringe_scan,
    visibility_to_fidelity,
)
