"""Two-mode Fock states {|0>, |1>} x {|0>, |1>} in the scaled coordinate representation.

Coordinates are dimensionless, x~ = sqrt(omega/hbar) x.  Density matrices are
4x4 complex arrays in the basis |00>, |01>, |10>, |11> (index 2*n1 + n2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PositivityError, UnsupportedModeError, ValidationError

PI_QUARTER = np.pi ** -0.25
SQRT2 = np.sqrt(2.0)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10


def hermite_mode(n, x):
    """Oscillator eigenfunction phi_n(x~) for n in {0, 1}."""
    if n not in (0, 1):
        raise UnsupportedModeError(f"only Fock levels 0 and 1 are supported, got {n!r}")
    x = np.asarray(x, dtype=float)
    phi = PI_QUARTER * np.exp(-0.5 * x * x)
    if n == 1:
        phi = SQRT2 * x * phi
    return phi if phi.ndim else float(phi)


def check_density_matrix(rho) -> np.ndarray:
    """Validate a two-mode density matrix and return it as a complex array.

    Raises ValidationError if the matrix is not 4x4, Hermitian, unit trace and
    positive semidefinite (eigenvalue floor -1e-10).
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError(f"density matrix must be 4x4, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValidationError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise ValidationError(f"density matrix trace is {np.trace(rho).real!r}, expected 1")
    if np.linalg.eigvalsh(rho).min() < PSD_FLOOR:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


@dataclass(frozen=True)
class CoordinateKernel:
    """rho(x, x') as a polynomial times a fixed Gaussian.

    ``coeffs[i, j, k, l]`` multiplies x1^i x2^j x1'^k x2'^l; the common factor
    (1/pi) exp[-(x1^2 + x2^2 + x1'^2 + x2'^2)/2] is implicit.
    """

    coeffs: np.ndarray

    def __call__(self, x1, x2, x1p, x2p):
        x1, x2, x1p, x2p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, x2, x1p, x2p)))
        poly = np.zeros(x1.shape, dtype=complex)
        for (i, j, k, l), c in np.ndenumerate(self.coeffs):
            if c != 0:
                poly = poly + c * x1 ** i * x2 ** j * x1p ** k * x2p ** l
        env = np.exp(-0.5 * (x1 * x1 + x2 * x2 + x1p * x1p + x2p * x2p)) / np.pi
        return poly * env

    def diagonal_poly(self) -> np.ndarray:
        """Real coefficients D[p, q] of x1^p x2^q (p, q <= 2) in the diagonal polynomial."""
        d = np.zeros((3, 3), dtype=complex)
        for (i, j, k, l), c in np.ndenumerate(self.coeffs):
            d[i + k, j + l] += c
        return d.real

    def diagonal_polynomial(self, x1, x2):
        """The diagonal polynomial alone (kernel at x' = x without the Gaussian), complex."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        poly = 0j
        for (i, j, k, l), c in np.ndenumerate(self.coeffs):
            if c != 0:
                poly = poly + c * x1 ** (i + k) * x2 ** (j + l)
        return poly

    def d_unprimed(self, axis: int, x1, x2):
        """d/dx_axis of the polynomial factor at x' = x (Gaussian excluded)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = 0j
        for (i, j, k, l), c in np.ndenumerate(self.coeffs):
            if c == 0:
                continue
            if axis == 0 and i == 1:
                out = out + c * x2 ** (j + l) * x1 ** k
            elif axis == 1 and j == 1:
                out = out + c * x1 ** (i + k) * x2 ** l
        return out

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        swapped = np.transpose(self.coeffs, (2, 3, 0, 1)).conj()
        return bool(np.max(np.abs(self.coeffs - swapped)) <= tol)


def kernel_from_matrix(rho) -> CoordinateKernel:
    rho = check_density_matrix(rho)
    coeffs = np.zeros((2, 2, 2, 2), dtype=complex)
    for n1 in (0, 1):
        for n2 in (0, 1):
            for m1 in (0, 1):
                for m2 in (0, 1):
                    coeffs[n1, n2, m1, m2] = rho[2 * n1 + n2, 2 * m1 + m2] * SQRT2 ** (n1 + n2 + m1 + m2)
    return CoordinateKernel(coeffs)


def diagonal_density(kernel: CoordinateKernel, x1, x2):
    """Position probability density rho(x, x) at scaled coordinates (vectorised)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    poly = kernel.diagonal_polynomial(x1, x2)
    if np.max(np.abs(np.imag(poly))) >= HERMITIAN_TOL:
        raise ValidationError("diagonal kernel has an imaginary part; kernel is not Hermitian")
    value = np.real(poly) * np.exp(-(x1 * x1 + x2 * x2)) / np.pi
    if np.min(value) < PSD_FLOOR:
        raise PositivityError(f"diagonal density is negative ({np.min(value):.3e})")
    return value if np.ndim(value) else float(value)


def _gauss_moments(lo, hi):
    """int_lo^hi x^k exp(-x^2) dx for k = 0, 1, 2, stacked on the last axis."""
    from scipy.special import erf

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    elo, ehi = np.exp(-lo * lo), np.exp(-hi * hi)
    m0 = 0.5 * np.sqrt(np.pi) * (erf(hi) - erf(lo))
    m1 = 0.5 * (elo - ehi)
    m2 = 0.5 * m0 + 0.5 * (lo * elo - hi * ehi)
    return np.stack([m0, m1, m2], axis=-1)


def cell_probabilities(kernel: CoordinateKernel, edges1, edges2) -> np.ndarray:
    """Exact probability mass of each rectangle of a tensor grid.

    The diagonal density is a sum of separable x^p exp(-x^2) terms, so each
    cell integral is a combination of closed-form one-dimensional moments.
    """
    e1 = np.asarray(edges1, dtype=float)
    e2 = np.asarray(edges2, dtype=float)
    m1 = _gauss_moments(e1[:-1], e1[1:])
    m2 = _gauss_moments(e2[:-1], e2[1:])
    return np.einsum("ip,pq,jq->ij", m1, kernel.diagonal_poly(), m2) / np.pi
