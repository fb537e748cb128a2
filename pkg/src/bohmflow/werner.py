"""Generalized Werner state under independent zero-temperature amplitude damping.

Time is measured as tau = omega*t; decays use gamma*t = (gamma/omega) * tau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UnsupportedTemperatureError

NORM_TOL = 1e-12


@dataclass(frozen=True)
class WernerParams:
    """rho = epsilon |psi><psi| + (1 - epsilon)/4 I with |psi> = a|00> + sign*b|11>.

    a and b are real and nonnegative.
    """

    a: float
    b: float
    epsilon: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ParameterError(f"sign must be +1 or -1, got {self.sign!r}")
        if not (0.0 <= self.a <= 1.0 and 0.0 <= self.b <= 1.0):
            raise ParameterError("a and b must lie in [0, 1]")
        if abs(self.a * self.a + self.b * self.b - 1.0) > NORM_TOL:
            raise ParameterError(f"a^2 + b^2 = {self.a**2 + self.b**2!r}, expected 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ParameterError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")

    @classmethod
    def from_a(cls, a: float, epsilon: float, sign: int = 1) -> "WernerParams":
        if not 0.0 <= a <= 1.0:
            raise ParameterError(f"a must lie in [0, 1], got {a!r}")
        return cls(a=a, b=math.sqrt(1.0 - a * a), epsilon=epsilon, sign=sign)


@dataclass(frozen=True)
class BathParams:
    gamma_over_omega: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if not self.gamma_over_omega >= 0.0:
            raise ParameterError("gamma_over_omega must be nonnegative")
        if not self.nbar >= 0.0:
            raise ParameterError("nbar must be nonnegative")

    def gamma_t(self, tau):
        return self.gamma_over_omega * tau


@dataclass(frozen=True)
class VelocityCoefficients:
    A: float
    B: float
    C: float


def _ket_psi(p: WernerParams) -> np.ndarray:
    return np.array([p.a, 0.0, 0.0, p.sign * p.b], dtype=complex)


def werner_initial(p: WernerParams) -> np.ndarray:
    psi = _ket_psi(p)
    return p.epsilon * np.outer(psi, psi.conj()) + (1.0 - p.epsilon) / 4.0 * np.eye(4, dtype=complex)


def damping_kraus(gamma_t: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode Kraus pair from |0>|0>_R -> |0>|0>_R and
    |1>|0>_R -> e^{-gt/2}|1>|0>_R + sqrt(1 - e^{-gt})|0>|1>_R."""
    decay = math.exp(-gamma_t)
    stay = np.array([[1.0, 0.0], [0.0, math.sqrt(decay)]])
    emit = np.array([[0.0, math.sqrt(-math.expm1(-gamma_t))], [0.0, 0.0]])
    return stay, emit


def damped_state(p: WernerParams, gamma_t: float, omega_t: float = 0.0) -> np.ndarray:
    """Werner state after the damping channel on both modes and free rotation.

    ``gamma_t`` and ``omega_t`` are independent here so the channel can be
    used at omega = 0 or gamma = 0.
    """
    if gamma_t < 0:
        raise ParameterError("gamma_t must be nonnegative")
    rho0 = werner_initial(p)
    kraus = damping_kraus(gamma_t)
    rho = np.zeros((4, 4), dtype=complex)
    for k1 in kraus:
        for k2 in kraus:
            k = np.kron(k1, k2)
            rho += k @ rho0 @ k.conj().T
    # free evolution under omega (n1 + n2): |00><11| picks up e^{+2i omega t}
    phase = np.exp(-1j * omega_t * np.array([0.0, 1.0, 1.0, 2.0]))
    rho = phase[:, None] * rho * phase.conj()[None, :]
    return 0.5 * (rho + rho.conj().T)


def werner_damped(p: WernerParams, bath: BathParams, tau: float) -> np.ndarray:
    """Density matrix at tau = omega*t for a zero-temperature bath."""
    if bath.nbar > 0:
        raise UnsupportedTemperatureError(
            "the analytic damping channel is zero-temperature; use velocity_generic with an "
            "explicit kernel for nbar > 0"
        )
    if tau < 0:
        raise ParameterError("time must be nonnegative")
    return damped_state(p, bath.gamma_t(tau), tau)


def _excited_weight(p: WernerParams) -> float:
    return p.epsilon * p.b * p.b + (1.0 - p.epsilon) / 4.0


def werner_coeffs(p: WernerParams, bath: BathParams, tau: float) -> VelocityCoefficients:
    decay = math.exp(-bath.gamma_t(tau))
    w11 = _excited_weight(p)
    mixed = (1.0 - p.epsilon) / 4.0
    return VelocityCoefficients(
        A=p.epsilon * p.a * p.b * decay,
        B=2.0 * w11 * decay * decay,
        C=2.0 * decay * (w11 * (1.0 - decay) + mixed),
    )


def coeff_arrays(p: WernerParams, gamma_over_omega: float, tau):
    """Vectorised (A, B, C, P00) over an array of tau values."""
    tau = np.asarray(tau, dtype=float)
    decay = np.exp(-gamma_over_omega * tau)
    w11 = _excited_weight(p)
    mixed = (1.0 - p.epsilon) / 4.0
    loss = 1.0 - decay
    a_coef = p.epsilon * p.a * p.b * decay
    b_coef = 2.0 * w11 * decay * decay
    c_coef = 2.0 * decay * (w11 * loss + mixed)
    p00 = (p.epsilon * p.a * p.a + mixed) + w11 * loss * loss + 2.0 * mixed * loss
    return a_coef, b_coef, c_coef, p00


def g_denominator(p: WernerParams, bath: BathParams, tau, x1, x2):
    """Diagonal density stripped of its (1/pi) exp(-x1^2 - x2^2) envelope."""
    a_coef, b_coef, c_coef, p00 = coeff_arrays(p, bath.gamma_over_omega, tau)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    g = (
        p00
        + 2.0 * b_coef * (x1 * x1) * (x2 * x2)
        + c_coef * (x1 * x1 + x2 * x2)
        + p.sign * 4.0 * a_coef * (x1 * x2) * np.cos(2.0 * np.asarray(tau, dtype=float))
    )
    return g if np.ndim(g) else float(g)
