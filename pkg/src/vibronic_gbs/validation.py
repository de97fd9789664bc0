"""Invariant suite run by ``vibronic-gbs validate``.

Each check reports its residual next to the tolerance it is held to, so a
failure says how far off the pipeline is and not only that it is off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientTruncation, VibronicError
from .fock import TruncationPolicy, build_fcp, transition_table
from .gaussian_core import relocate_displacement, vacuum_overlap
from .phase_space import photon_moments, reduce, state_from_transform
from .thermal import mean_occupation
from .vibronic import (
    ORTHOGONALITY_TOL,
    build_doktorov,
    compile_circuit,
    orthogonality_residual,
)

log = logging.getLogger(__name__)

RELOCATION_TOL = 1e-10
PURITY_TOL = 1e-8
OCCUPATION_TOL = 1e-8
REDUCTION_TOL = 1e-9
MOMENT_TOL = 1e-4
OVERLAP_TOL = 1e-10
ANCILLA_TOL = 1e-10
# The moment cross-check raises the cutoff until this little mass is missing.
MOMENT_MISSING_MASS = 1e-7
MOMENT_MAX_N = 40


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name:<28} residual={self.residual:.3e}  tol={self.tolerance:.1e}"
        return text + (f"  ({self.detail})" if self.detail else "")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _check(name: str, residual: float, tol: float, detail: str = "") -> Check:
    residual = float(residual)
    return Check(name, bool(np.isfinite(residual) and residual <= tol), residual, tol, detail)


def _converged_table(circuit, policy: TruncationPolicy):
    n_max = policy.n_max or 8
    while True:
        table = transition_table(circuit, replace(policy, n_max=n_max, target_mass=1e-12))
        if 1.0 - table.captured_mass <= MOMENT_MISSING_MASS or n_max >= MOMENT_MAX_N:
            return table
        n_max += 4


def run_checks(config) -> list[Check]:
    """All invariants for one job; numerical failures become failed checks."""
    mol = config.molecule
    T = config.temperature
    tols = config.tolerances
    checks = [_check("duschinsky_orthogonality", orthogonality_residual(mol.duschinsky), ORTHOGONALITY_TOL)]

    try:
        dok = build_doktorov(mol)
        circuit = compile_circuit(mol, T, tols.constraint, tols.reconstruction)
    except VibronicError as exc:
        checks.append(Check("compile", False, float("nan"), 0.0, f"{type(exc).__name__}: {exc}"))
        return checks
    t = circuit.transform
    dec = circuit.decomposition

    checks.append(_check("doktorov_constraints", max(dok.constraint_residuals()), tols.constraint))
    checks.append(_check("extended_constraints", max(t.constraint_residuals()), tols.constraint))
    checks.append(_check("reconstruction", max(dec.reconstruction_residuals(t)), tols.reconstruction))
    checks.append(_check("interferometer_unitarity", max(dec.unitarity_residuals()), tols.reconstruction))
    gp = relocate_displacement(t.X, t.Y, t.z)
    checks.append(_check("relocation", np.linalg.norm(t.z - t.X @ gp - t.Y @ gp.conj()), RELOCATION_TOL))
    circ = dec.as_circuit()
    checks.append(
        _check(
            "primitive_circuit",
            max(np.max(np.abs(circ.X - t.X)), np.max(np.abs(circ.Y - t.Y)), np.max(np.abs(circ.z - t.z))),
            tols.reconstruction,
        )
    )

    m = mol.modes
    state = state_from_transform(t)
    checks.append(_check("purity", np.max(np.abs(state.symplectic_eigenvalues() - 1.0)), PURITY_TOL))
    n_bar = np.atleast_1d(mean_occupation(T, mol.omega_initial))
    ancilla_means, _ = photon_moments(reduce(state, range(m, 2 * m)))
    checks.append(_check("ancilla_occupations", np.max(np.abs(ancilla_means - n_bar)), OCCUPATION_TOL))
    direct = state_from_transform(dok, n_bar)
    system = reduce(state, range(m))
    checks.append(
        _check(
            "system_reduction",
            max(np.max(np.abs(system.cov - direct.cov)), np.max(np.abs(system.mean - direct.mean))),
            REDUCTION_TOL,
        )
    )

    try:
        table = transition_table(circuit, config.truncation)
    except InsufficientTruncation as exc:
        checks.append(
            Check("captured_mass", False, 1.0 - exc.captured_mass, 1.0 - config.truncation.target_mass, str(exc))
        )
        return checks
    checks.append(
        _check(
            "captured_mass",
            1.0 - table.captured_mass,
            1.0 - config.truncation.target_mass,
            f"n_max={table.n_max}",
        )
    )
    checks.append(
        _check("vacuum_overlap", abs(table.probability(np.zeros(2 * m, dtype=int)) - vacuum_overlap(t)), OVERLAP_TOL)
    )
    spectrum = build_fcp(table, mol, config.bin_width)
    checks.append(_check("spectrum_normalization", abs(spectrum.normalization - table.captured_mass), 1e-12))
    if T == 0.0:
        excited = float(table.probabilities[np.any(table.n != 0, axis=1)].sum())
        checks.append(_check("ancilla_point_mass", excited, ANCILLA_TOL))

    fine = _converged_table(circuit, config.truncation)
    fock_mean, fock_cov = fine.photon_moments()
    ps_mean, ps_cov = photon_moments(state)
    checks.append(
        _check(
            "oracle_moments",
            max(np.max(np.abs(fock_mean - ps_mean)), np.max(np.abs(np.diag(fock_cov) - np.diag(ps_cov)))),
            MOMENT_TOL,
            f"n_max={fine.n_max}, missing mass {1.0 - fine.captured_mass:.1e}",
        )
    )
    return checks
