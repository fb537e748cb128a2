"""Bohmian trajectories and lattice beables for damped two-mode Werner states."""

__version__ = "0.1.0"

from .bohm import (PhasePoint, Trajectory, amplitude_metric, equivariance_distance,  # noqa: E402
                   integrate_trajectory, sample_initial_ensemble, velocity_analytic, velocity_generic)
from .entanglement import concurrence, separability_threshold, sudden_death_time  # noqa: E402
from .fockspace import diagonal_density, hermite_mode, kernel_from_matrix  # noqa: E402
from .werner import (BathParams, WernerParams, g_denominator, werner_coeffs,  # noqa: E402
                     werner_damped, werner_initial)

__all__ = [
    "BathParams", "PhasePoint", "Trajectory", "WernerParams", "amplitude_metric", "concurrence",
    "diagonal_density", "equivariance_distance", "g_denominator", "hermite_mode", "integrate_trajectory",
    "kernel_from_matrix", "sample_initial_ensemble", "separability_threshold", "sudden_death_time",
    "velocity_analytic", "velocity_generic", "werner_coeffs", "werner_damped", "werner_initial",
]
