r"""Gaussian states in phase space, used as an oracle independent of Fock space.

Quadratures are ``q = a + a^+`` and ``p = -i (a - a^+)`` so the vacuum has unit
covariance. Vectors are ordered ``(q_1..q_M, p_1..p_M)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularCovariance, ValidationError
from .gaussian_core import CONSTRAINT_TOL, BogoliubovTransform

SYMMETRY_TOL = 1e-10
PHYSICALITY_TOL = 1e-9


def conversion_matrix(modes: int) -> np.ndarray:
    """``L^+`` mapping ``(a, a^+)`` to ``(q, p)``."""
    i = np.eye(modes)
    return np.block([[i, i], [-1j * i, 1j * i]])


def symplectic_form(modes: int) -> np.ndarray:
    i = np.eye(modes)
    z = np.zeros((modes, modes))
    return np.block([[z, i], [-i, z]])


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.shape[0] % 2 or cov.shape != (mean.shape[0],) * 2:
            raise DimensionMismatch("mean must have length 2M and cov shape (2M, 2M)")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise ValidationError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        for name, arr in (("mean", mean), ("cov", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def modes(self) -> int:
        return self.mean.shape[0] // 2

    @classmethod
    def vacuum(cls, modes: int) -> "GaussianState":
        return cls(np.zeros(2 * modes), np.eye(2 * modes))

    def symplectic_eigenvalues(self) -> np.ndarray:
        """Sorted symplectic eigenvalues (each appears once)."""
        ev = np.linalg.eigvals(1j * symplectic_form(self.modes) @ self.cov)
        return np.sort(np.abs(ev))[::2]

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        m = self.cov + 1j * symplectic_form(self.modes)
        return bool(np.min(np.linalg.eigvalsh(m)) >= -tol)

    def is_pure(self, tol: float = 1e-8) -> bool:
        return bool(np.max(np.abs(self.symplectic_eigenvalues() - 1.0)) <= tol)

    def complex_mean(self) -> np.ndarray:
        """``<a_k>`` for every mode."""
        m = self.modes
        return 0.5 * (self.mean[:m] + 1j * self.mean[m:])


def state_from_transform(
    t: BogoliubovTransform, occupations=None, tol: float = CONSTRAINT_TOL
) -> GaussianState:
    """State ``O rho_th O^+`` for the Gaussian unitary ``O`` described by ``t``.

    ``occupations`` are the mean thermal quanta of the input modes (vacuum if
    omitted). Output annihilators are ``conj(Y) a + conj(X) a^+ + conj(z)``,
    so the symmetrized covariance is ``L^+ W Xi W^t conj(L) / 2``.
    """
    t.check(tol)
    m = t.dim
    n_bar = np.zeros(m) if occupations is None else np.asarray(occupations, dtype=float)
    if n_bar.shape != (m,):
        raise DimensionMismatch(f"need {m} occupations, got {n_bar.shape}")
    if np.any(n_bar < 0):
        raise ValidationError("occupations must be >= 0")
    nu = np.diag(2.0 * n_bar + 1.0)
    zero = np.zeros((m, m))
    w = np.block([[t.Y.conj(), t.X.conj()], [t.X, t.Y]])
    xi = np.block([[zero, nu], [nu, zero]])
    lh = conversion_matrix(m)
    cov = 0.5 * lh @ w @ xi @ w.T @ lh.T
    mean = lh @ np.concatenate([t.z.conj(), t.z])
    return GaussianState(mean.real, cov.real)


def husimi_q(state: GaussianState, alpha) -> float:
    """Husimi function ``<alpha|rho|alpha> / pi^M`` as a density in ``d^2 alpha``."""
    m = state.modes
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    if alpha.shape != (m,):
        raise DimensionMismatch(f"alpha must have {m} entries")
    sigma = state.cov + np.eye(2 * m)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("V + I is not positive definite") from exc
    if np.min(np.diag(chol)) < 1e-150:
        raise SingularCovariance("V + I is numerically singular")
    x = np.concatenate([2 * alpha.real, 2 * alpha.imag]) - state.mean
    y = np.linalg.solve(chol, x)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(np.exp(-0.5 * y @ y - 0.5 * log_det) * 2.0**m / np.pi**m)


def husimi_q_reduced(u_l, sigma, n_bar, alpha) -> float:
    r"""Closed form of the Husimi function of ``R(U_L) S(sigma) rho_th S^+ R^+``.

    The quadratic form uses ``lambda_k = ((V_p + 1)^-1 - (V_x + 1)^-1) / 2`` and
    ``mu_k = (V_x + 1)^-1 + (V_p + 1)^-1`` with ``V_x = (2n + 1) e^{2 sigma}`` and
    ``V_p = (2n + 1) e^{-2 sigma}``. With ``lambda`` of this sign the ``q``
    quadrature carries the variance ``V_x``, matching ``state_from_transform``.
    """
    u = np.asarray(u_l, dtype=complex)
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    n_bar = np.atleast_1d(np.asarray(n_bar, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    vx = (2 * n_bar + 1) * np.exp(2 * sigma)
    vp = (2 * n_bar + 1) * np.exp(-2 * sigma)
    lam = 0.5 * (1 / (vp + 1) - 1 / (vx + 1))
    mu = 1 / (vx + 1) + 1 / (vp + 1)
    a = np.concatenate([alpha, alpha.conj()])
    quad = np.block(
        [
            [u @ np.diag(lam) @ u.T, -u @ np.diag(mu) @ u.conj().T / 2],
            [-u.conj() @ np.diag(mu) @ u.T / 2, u.conj() @ np.diag(lam) @ u.conj().T],
        ]
    )
    expo = (a @ quad @ a).real
    norm = np.prod(np.sqrt(mu**2 - 4 * lam**2)) / np.pi ** len(sigma)
    return float(norm * np.exp(expo))


def reduce(state: GaussianState, keep) -> GaussianState:
    """Partial trace: keep the listed modes in the given order."""
    keep = [int(k) for k in np.atleast_1d(keep)]
    m = state.modes
    if not keep or any(k < 0 or k >= m for k in keep):
        raise ValidationError(f"keep must be a non-empty subset of 0..{m - 1}")
    idx = np.array(keep + [k + m for k in keep])
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def photon_moments(state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    """Mean photon numbers and their covariance matrix.

    Uses ``n = (q^2 + p^2 - 2) / 4`` with Isserlis' theorem for the Gaussian
    fourth moments.
    """
    m = state.modes
    v, d = state.cov, state.mean
    q = np.arange(m)
    p = q + m
    means = (v[q, q] + v[p, p] - 2.0 + d[q] ** 2 + d[p] ** 2) / 4.0
    cov = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            rows, cols = [q[i], p[i]], [q[j], p[j]]
            block = v[np.ix_(rows, cols)]
            cov[i, j] = np.sum(block**2) / 8.0 + d[rows] @ block @ d[cols] / 4.0
    cov -= np.eye(m) / 4.0
    return means, cov


def vacuum_probability(state: GaussianState) -> float:
    """Probability of detecting no photon in any mode, ``pi^M Q(0)``."""
    return husimi_q(state, np.zeros(state.modes)) * np.pi**state.modes
