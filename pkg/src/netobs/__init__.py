"""Observability and controllability of networked LTI systems from subsystem
zeros, and distributed versus lumped one-step state prediction."""
from netobs.config import DEFAULT_TOL, Tolerances
from netobs.core_model import NetworkedSystem, Subsystem, assemble_lumped, build_system, dual_system
from netobs.io import load_model, save_model
from netobs.verify import check_kalman_convergence, verify_controllability, verify_observability

__all__ = [
    "DEFAULT_TOL", "Tolerances", "NetworkedSystem", "Subsystem", "assemble_lumped", "build_system", "dual_system",
    "load_model", "save_model", "check_kalman_convergence", "verify_controllability", "verify_observability",
]
