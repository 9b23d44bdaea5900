"""Cavity-mediated qudit-to-qudit state transfer: compiler, integrators, sweeps."""
from .dynamics import (
    EvolutionResult,
    IntegrationError,
    IntegratorOptions,
    evolve_master,
    evolve_unitary,
    evolve_unitary_batch,
    fidelity,
)
from .experiments import SweepConfig, SweepResult, preset_ideal, preset_paper, run_sweep
from .hilbert import DensityMatrix, HilbertSpace, Operator, StateVector, composite_space
from .model import ModelParams, collapse_operators, cavity_coupling_hamiltonian, pulse_hamiltonian
from .protocol import Schedule, compile_schedule, ideal_evolve, initial_state, target_state

__all__ = [
    "DensityMatrix", "EvolutionResult", "HilbertSpace", "IntegrationError", "IntegratorOptions",
    "ModelParams", "Operator", "Schedule", "StateVector", "SweepConfig", "SweepResult",
    "cavity_coupling_hamiltonian", "collapse_operators", "compile_schedule", "composite_space",
    "evolve_master", "evolve_unitary", "evolve_unitary_batch", "fidelity", "ideal_evolve",
    "initial_state", "preset_ideal", "preset_paper", "pulse_hamiltonian", "run_sweep", "target_state",
]
