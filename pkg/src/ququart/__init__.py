"""Simulator and analysis toolkit for a two-ququart trapped-ion processor."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DensityMatrix,
    DimensionError,
    QuditState,
    ValidationError,
    apply_unitary,
    basis_state,
    fidelity,
    partial_trace,
    populations,
    state_fidelity,
)
from .gates import MSGate, Rotation, composite_rotation, decompose_single_qudit, ms_matrix, rotation_matrix  # noqa: E402
from .ms import MotionState, PulseParams, ScanResult, evolve_ms, evolve_ms_numeric, params_for_duration  # noqa: E402
from .noise import NoiseModel, ShotRecord, camera_readout, estimate_populations, shelving_readout  # noqa: E402
from .fitting import bell_fidelity, fit_damped_sine, fit_parity  # noqa: E402
from .experiments import bell_experiment, ms_scan, parity_scan, rabi_fidelity, rabi_scan  # noqa: E402
from .transpiler import QubitCircuit, QuditCircuit, transpile_circuit  # noqa: E402

__all__ = [
    "DensityMatrix", "DimensionError", "QuditState", "ValidationError", "apply_unitary", "basis_state", "fidelity",
    "partial_trace", "populations", "state_fidelity", "MSGate", "Rotation", "composite_rotation",
    "decompose_single_qudit", "ms_matrix", "rotation_matrix", "MotionState", "PulseParams", "ScanResult", "evolve_ms",
    "evolve_ms_numeric", "params_for_duration", "NoiseModel", "ShotRecord", "camera_readout", "estimate_populations",
    "shelving_readout", "bell_fidelity", "fit_damped_sine", "fit_parity", "bell_experiment", "ms_scan", "parity_scan",
    "rabi_fidelity", "rabi_scan", "QubitCircuit", "QuditCircuit", "transpile_circuit",
]
