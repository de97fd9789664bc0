"""Thermal-state purification on a doubled (system + ancilla) mode space.

Frequencies are wavenumbers in cm^-1 and temperatures in kelvin, so the
Boltzmann exponent is ``c2 * omega / T`` with the second radiation constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import physical_constants

from .errors import DimensionMismatch, InvalidFrequency, ValidationError
from .gaussian_core import BogoliubovTransform

# Second radiation constant h c / k_B in cm K.
C2_CM_K = physical_constants["second radiation constant"][0] * 100.0


def boltzmann_exponent(temperature, omega) -> np.ndarray:
    """``beta hbar omega`` for wavenumbers ``omega``; ``inf`` where T = 0."""
    omega = np.asarray(omega, dtype=float)
    temperature = np.broadcast_to(np.asarray(temperature, dtype=float), omega.shape)
    if np.any(~np.isfinite(omega)) or np.any(omega <= 0):
        raise InvalidFrequency(f"frequencies must be finite and > 0, got {omega}")
    if np.any(~np.isfinite(temperature)) or np.any(temperature < 0):
        raise ValidationError(f"temperature must be finite and >= 0, got {temperature}")
    with np.errstate(divide="ignore"):
        return np.where(temperature > 0, C2_CM_K * omega / np.where(temperature > 0, temperature, 1.0), np.inf)


def mean_occupation(temperature, omega):
    """Bose-Einstein occupation ``1 / (exp(c2 omega / T) - 1)``; exactly 0 at T = 0."""
    x = boltzmann_exponent(temperature, omega)
    with np.errstate(over="ignore"):
        n = np.where(np.isinf(x), 0.0, 1.0 / np.expm1(np.where(np.isinf(x), 1.0, x)))
    return float(n) if n.ndim == 0 else n


def purification_angles_from_occupation(n_bar) -> np.ndarray:
    """Two-mode squeezing angles with ``tanh(theta / 2) = sqrt(n / (n + 1))``."""
    n_bar = np.asarray(n_bar, dtype=float)
    return 2.0 * np.arcsinh(np.sqrt(n_bar))


@dataclass(frozen=True)
class ThermalExtension:
    """Per-mode thermal data needed to purify a product of thermal states."""

    omega: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        omega = np.atleast_1d(np.array(self.omega, dtype=float))
        if omega.ndim != 1 or omega.size == 0:
            raise ValidationError("omega must be a non-empty vector")
        temperature = np.array(
            np.broadcast_to(np.asarray(self.temperature, dtype=float), omega.shape)
        )
        # Validates signs and finiteness.
        boltzmann_exponent(temperature, omega)
        for name, arr in (("omega", omega), ("temperature", temperature)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def modes(self) -> int:
        return self.omega.shape[0]

    @property
    def n_bar(self) -> np.ndarray:
        return np.atleast_1d(mean_occupation(self.temperature, self.omega))

    @property
    def theta(self) -> np.ndarray:
        return purification_angles(self)

    @property
    def F(self) -> np.ndarray:
        return np.sqrt(self.n_bar + 1.0)

    @property
    def G(self) -> np.ndarray:
        return np.sqrt(self.n_bar)


def purification_angles(ext: ThermalExtension) -> np.ndarray:
    """``theta_k = 2 artanh(exp(-beta_k hbar omega_k / 2))``."""
    x = boltzmann_exponent(ext.temperature, ext.omega)
    return 2.0 * np.arctanh(np.exp(-0.5 * x))


def two_mode_squeezing(ext: ThermalExtension) -> BogoliubovTransform:
    """Transform of the purifying operator V(beta) on (system, ancilla) modes."""
    m = ext.modes
    F, G = np.diag(ext.F), np.diag(ext.G)
    zero = np.zeros((m, m))
    X = np.block([[zero, G], [G, zero]])
    Y = np.block([[F, zero], [zero, F]])
    return BogoliubovTransform(X, Y, np.zeros(2 * m))


def extend_transform(t: BogoliubovTransform, ext: ThermalExtension) -> BogoliubovTransform:
    """Embed an M-mode transform acting after V(beta) into 2M modes.

    System modes come first, ancilla modes second.
    """
    if t.dim != ext.modes:
        raise DimensionMismatch(f"transform has {t.dim} modes, extension has {ext.modes}")
    m = t.dim
    F, G = np.diag(ext.F), np.diag(ext.G)
    zero = np.zeros((m, m))
    X = np.block([[t.X @ F, t.Y @ G], [G, zero]])
    Y = np.block([[t.Y @ F, t.X @ G], [zero, F]])
    z = np.concatenate([t.z, np.zeros(m)])
    return BogoliubovTransform(X, Y, z)
