r"""Molecular model, Doktorov transform and compilation to an optical circuit.

The Doktorov operator
:math:`\hat D_{\delta/\sqrt2}\,\hat S_{\ln\Omega'}\,\hat R_U\,\hat S^\dagger_{\ln\Omega}`
has ``X = (J - J^{-t}) / 2``, ``Y = (J + J^{-t}) / 2`` and ``z = delta / sqrt 2``
with ``J = Omega' U Omega^-1``. At finite temperature it is applied after the
purifying two-mode squeezer, giving a zero-temperature problem on 2M modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SingularJ, ValidationError
from .gaussian_core import (
    CONSTRAINT_TOL,
    RECONSTRUCTION_TOL,
    BogoliubovTransform,
    GaussianDecomposition,
    check_unitary,
    decompose,
)
from .thermal import ThermalExtension, extend_transform

ORTHOGONALITY_TOL = 1e-8
J_COND_MAX = 1e12


def _vec(a, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.array(a, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def orthogonality_residual(u) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.max(np.abs(u.T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True)
class MolecularSystem:
    """Harmonic model of two electronic states linked by a Duschinsky rotation.

    ``omega_initial`` belongs to the thermally populated initial state and
    ``omega_final`` to the final state (both cm^-1); ``delta`` is the
    dimensionless displacement. Pass ``strict=False`` to skip the
    orthogonality check so that a diagnostic run can report it instead.
    """

    omega_initial: np.ndarray
    omega_final: np.ndarray
    duschinsky: np.ndarray
    delta: np.ndarray
    label: str = "molecule"
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        w = _vec(self.omega_initial, "omega_initial")
        wp = _vec(self.omega_final, "omega_final")
        delta = _vec(self.delta, "delta")
        u = np.array(self.duschinsky, dtype=float, ndmin=2)
        m = w.shape[0]
        if wp.shape != (m,) or delta.shape != (m,) or u.shape != (m, m):
            raise ValidationError(
                f"inconsistent mode counts: omega_initial {w.shape}, omega_final "
                f"{wp.shape}, duschinsky {u.shape}, delta {delta.shape}"
            )
        if np.any(w <= 0) or np.any(wp <= 0):
            raise ValidationError("all vibrational frequencies must be > 0")
        if not np.all(np.isfinite(u)):
            raise ValidationError("duschinsky must be finite")
        if self.strict and orthogonality_residual(u) > ORTHOGONALITY_TOL:
            raise ValidationError(
                f"duschinsky matrix is not orthogonal "
                f"(max|U^tU - I| = {orthogonality_residual(u):.3e})"
            )
        u.setflags(write=False)
        object.__setattr__(self, "omega_initial", w)
        object.__setattr__(self, "omega_final", wp)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "duschinsky", u)

    @property
    def modes(self) -> int:
        return self.omega_initial.shape[0]

    @classmethod
    def identity(cls, omega, label: str = "identity") -> "MolecularSystem":
        """Equal frequencies, no rotation, no displacement."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        m = omega.shape[0]
        return cls(omega, omega, np.eye(m), np.zeros(m), label=label)


def nearest_orthogonal(u) -> np.ndarray:
    """Polar projection of a real matrix onto the orthogonal group."""
    q, _ = linalg.polar(np.asarray(u, dtype=float))
    return q


# Tabulated to four decimals, so only orthogonal to ~2e-5 before projection.
SO2_DUSCHINSKY = ((0.9979, 0.0646), (-0.0646, 0.9979))


def so2_anion() -> MolecularSystem:
    """SO2- -> SO2 photodetachment parameters (anion frequencies are initial)."""
    return MolecularSystem(
        omega_initial=[989.5, 451.4],
        omega_final=[1178.4, 518.9],
        duschinsky=nearest_orthogonal(SO2_DUSCHINSKY),
        delta=[-1.8830, 0.4551],
        label="SO2-",
    )


def squeezing_db(s) -> np.ndarray:
    """Squeezing in dB, ``10 log10(exp(-2 s))``."""
    return 10.0 * np.log10(np.exp(-2.0 * np.asarray(s, dtype=float)))


@dataclass(frozen=True)
class CircuitSpec:
    """Zero-temperature GBS circuit: squeezed coherent inputs into an interferometer."""

    interferometer: np.ndarray
    squeezing: np.ndarray
    input_amplitudes: np.ndarray
    temperature: float
    label: str
    molecule: MolecularSystem | None = None
    decomposition: GaussianDecomposition | None = field(default=None, compare=False)
    transform: BogoliubovTransform | None = field(default=None, compare=False)

    def __post_init__(self):
        u = np.array(self.interferometer, dtype=complex)
        check_unitary(u, 1e-10)
        s = np.array(self.squeezing, dtype=float).reshape(-1)
        g = np.array(self.input_amplitudes, dtype=complex).reshape(-1)
        if s.shape[0] != u.shape[0] or g.shape[0] != u.shape[0]:
            raise ValidationError("circuit arrays disagree on the number of modes")
        for name, arr in (("interferometer", u), ("squeezing", s), ("input_amplitudes", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def modes(self) -> int:
        return self.squeezing.shape[0]

    @property
    def squeezing_db(self) -> np.ndarray:
        return squeezing_db(self.squeezing)


def build_j_matrix(mol: MolecularSystem) -> np.ndarray:
    """``Omega' U Omega^-1`` formed entry-wise so that equal frequencies give exactly U."""
    ratio = mol.omega_final[:, None] / mol.omega_initial[None, :]
    return np.sqrt(ratio) * mol.duschinsky


def build_doktorov(mol: MolecularSystem, cond_max: float = J_COND_MAX) -> BogoliubovTransform:
    j = build_j_matrix(mol)
    cond = np.linalg.cond(j)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularJ(f"J is numerically singular (cond = {cond:.3e})")
    j_inv_t = np.linalg.inv(j.T)
    return BogoliubovTransform(
        0.5 * (j - j_inv_t), 0.5 * (j + j_inv_t), mol.delta / np.sqrt(2.0)
    )


def thermal_extension(mol: MolecularSystem, temperature) -> ThermalExtension:
    return ThermalExtension(mol.omega_initial, temperature)


def build_vibronic_transform(mol: MolecularSystem, temperature) -> BogoliubovTransform:
    """2M-mode transform of ``U_Dok V(beta)``; system modes first."""
    return extend_transform(build_doktorov(mol), thermal_extension(mol, temperature))


def compile_circuit(
    mol: MolecularSystem,
    temperature: float,
    constraint_tol: float = CONSTRAINT_TOL,
    reconstruction_tol: float = RECONSTRUCTION_TOL,
) -> CircuitSpec:
    t = build_vibronic_transform(mol, temperature)
    dec = decompose(t, constraint_tol, reconstruction_tol)
    return CircuitSpec(
        interferometer=dec.C_L,
        squeezing=dec.S,
        input_amplitudes=dec.gamma_dprime,
        temperature=float(temperature),
        label=mol.label,
        molecule=mol,
        decomposition=dec,
        transform=t,
    )
