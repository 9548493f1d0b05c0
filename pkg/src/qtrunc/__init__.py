"""Certified Galerkin truncation sizes, propagation and monotonic optimal control
for weakly coupled quantum systems with a discrete spectrum."""

__version__ = "0.1.0"

from .bounds import FieldBudget, TruncationReport, full_report, refined_dimension_oscillator, refined_dimension_rotor
from .optimize import OptimizationResult, OptimizerConfig, optimize_monotonic
from .propagate import ControlField, Trajectory, basis_state, field_l1_norm, final_distance, leakage_profile, propagate
from .system import QuantumSystem, builtin_oscillator, builtin_rotor, load_system
from .verify import VerificationReport, run_suite

__all__ = [
    "ControlField",
    "FieldBudget",
    "OptimizationResult",
    "OptimizerConfig",
    "QuantumSystem",
    "Trajectory",
    "TruncationReport",
    "VerificationReport",
    "basis_state",
    "builtin_oscillator",
    "builtin_rotor",
    "field_l1_norm",
    "final_distance",
    "full_report",
    "leakage_profile",
    "load_system",
    "optimize_monotonic",
    "propagate",
    "refined_dimension_oscillator",
    "refined_dimension_rotor",
    "run_suite",
]
