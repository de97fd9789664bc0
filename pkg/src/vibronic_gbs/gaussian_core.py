r"""Bogoliubov transforms of bosonic creation operators.

A Gaussian unitary :math:`\hat O` acts on the vector of creation operators as

.. math::
    \hat O^\dagger \hat{\mathbf a}^\dagger \hat O = X \hat{\mathbf a} + Y \hat{\mathbf a}^\dagger + \mathbf z ,

so the identity is ``X = 0, Y = I, z = 0``. Valid pairs obey
``Y Y^+ - X X^+ = I`` and ``X Y^t = Y X^t``.

The convention for composition is operator order: ``compose(outer, inner)``
is the transform of the product ``outer @ inner``, i.e. ``inner`` acts on the
state first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    ConstraintViolation,
    DimensionMismatch,
    NonUnitary,
    NumericalFailure,
    SingularSystem,
    ValidationError,
)

CONSTRAINT_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9
UNITARY_TOL = 1e-10
# Block matrix in relocate_displacement is rejected above this condition number.
RELOCATION_COND_MAX = 1e12


def _frozen(a, dtype=complex) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NonUnitary(f"expected a square matrix, got shape {u.shape}")
    res = unitarity_residual(u)
    if res > tol:
        raise NonUnitary(f"matrix is not unitary: max|U^+U - I| = {res:.3e} > {tol:.1e}")
    return u


@dataclass(frozen=True)
class BogoliubovTransform:
    """Immutable (X, Y, z) triple describing a Gaussian unitary on ``dim`` modes."""

    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        X = _frozen(self.X)
        Y = _frozen(self.Y)
        z = _frozen(self.z).reshape(-1)
        n = z.shape[0]
        if n < 1:
            raise DimensionMismatch("a transform needs at least one mode")
        if X.shape != (n, n) or Y.shape != (n, n):
            raise DimensionMismatch(
                f"X {X.shape}, Y {Y.shape} and z ({n},) do not agree"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "z", z)

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "BogoliubovTransform":
        return cls(np.zeros((dim, dim)), np.eye(dim), np.zeros(dim))

    def constraint_residuals(self) -> tuple[float, float]:
        """Max-abs residuals of ``YY^+ - XX^+ - I`` and ``XY^t - YX^t``."""
        X, Y = self.X, self.Y
        r1 = Y @ Y.conj().T - X @ X.conj().T - np.eye(self.dim)
        r2 = X @ Y.T - Y @ X.T
        return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))

    def is_valid(self, tol: float = CONSTRAINT_TOL) -> bool:
        return max(self.constraint_residuals()) <= tol

    def check(self, tol: float = CONSTRAINT_TOL) -> "BogoliubovTransform":
        r1, r2 = self.constraint_residuals()
        if max(r1, r2) > tol:
            raise ConstraintViolation(
                f"Bogoliubov constraints violated: |YY^+-XX^+-I| = {r1:.3e}, "
                f"|XY^t-YX^t| = {r2:.3e} (tol {tol:.1e})"
            )
        return self

    def embed(self, total: int, offset: int = 0) -> "BogoliubovTransform":
        """Act as this transform on modes ``offset..offset+dim`` of ``total`` modes."""
        if offset < 0 or offset + self.dim > total:
            raise DimensionMismatch("embedding does not fit")
        X = np.zeros((total, total), dtype=complex)
        Y = np.eye(total, dtype=complex)
        z = np.zeros(total, dtype=complex)
        sl = slice(offset, offset + self.dim)
        X[sl, sl] = self.X
        Y[sl, sl] = self.Y
        z[sl] = self.z
        return BogoliubovTransform(X, Y, z)

    def allclose(self, other: "BogoliubovTransform", atol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and np.allclose(self.X, other.X, atol=atol, rtol=0)
            and np.allclose(self.Y, other.Y, atol=atol, rtol=0)
            and np.allclose(self.z, other.z, atol=atol, rtol=0)
        )


def from_displacement(alpha) -> BogoliubovTransform:
    """Displacement ``D_alpha``: creation operators shift by ``conj(alpha)``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    n = alpha.shape[0]
    return BogoliubovTransform(np.zeros((n, n)), np.eye(n), alpha.conj())


def from_squeezing(sigma) -> BogoliubovTransform:
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if not np.all(np.isfinite(sigma)):
        raise ValidationError("squeezing parameters must be finite")
    return BogoliubovTransform(
        np.diag(np.sinh(sigma)), np.diag(np.cosh(sigma)), np.zeros(sigma.shape[0])
    )


def from_rotation(u, tol: float = UNITARY_TOL) -> BogoliubovTransform:
    u = check_unitary(u, tol)
    n = u.shape[0]
    return BogoliubovTransform(np.zeros((n, n)), u, np.zeros(n))


def compose(outer: BogoliubovTransform, inner: BogoliubovTransform) -> BogoliubovTransform:
    """Transform of the operator product ``outer @ inner``.

    Conjugating ``a^+`` first by ``outer`` and then by ``inner`` gives
    ``X = Xo conj(Yi) + Yo Xi``, ``Y = Xo conj(Xi) + Yo Yi`` and
    ``z = Xo conj(zi) + Yo zi + zo``.
    """
    if outer.dim != inner.dim:
        raise DimensionMismatch(f"cannot compose dims {outer.dim} and {inner.dim}")
    Xo, Yo, zo = outer.X, outer.Y, outer.z
    Xi, Yi, zi = inner.X, inner.Y, inner.z
    return BogoliubovTransform(
        Xo @ Yi.conj() + Yo @ Xi,
        Xo @ Xi.conj() + Yo @ Yi,
        Xo @ zi.conj() + Yo @ zi + zo,
    )


def compose_all(*transforms: BogoliubovTransform) -> BogoliubovTransform:
    """Compose left to right in operator order: ``compose_all(A, B, C) = A @ B @ C``."""
    if not transforms:
        raise ValidationError("nothing to compose")
    result = transforms[-1]
    for t in reversed(transforms[:-1]):
        result = compose(t, result)
    return result


def relocate_displacement(X, Y, gamma, cond_max: float = RELOCATION_COND_MAX) -> np.ndarray:
    """Solve ``gamma = X g + Y conj(g)`` for the right-hand displacement ``g``.

    Splitting into real and imaginary parts gives a real linear system of
    size ``2 dim``; it is solved directly.
    """
    X = np.asarray(X, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    gamma = np.asarray(gamma, dtype=complex).reshape(-1)
    n = gamma.shape[0]
    if X.shape != (n, n) or Y.shape != (n, n):
        raise DimensionMismatch("X, Y and gamma do not agree")
    Xr, Xi, Yr, Yi = X.real, X.imag, Y.real, Y.imag
    block = np.block([[Xr + Yr, -Xi + Yi], [Xi + Yi, Xr - Yr]])
    cond = np.linalg.cond(block)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularSystem(f"relocation system is singular (cond = {cond:.3e})")
    sol = np.linalg.solve(block, np.concatenate([gamma.real, gamma.imag]))
    return sol[:n] + 1j * sol[n:]


def vacuum_overlap(t: BogoliubovTransform) -> float:
    """``|<0|O|0>|^2`` for the Gaussian unitary ``O`` described by ``t``.

    Writing ``O = O_0 D(g)`` with ``g`` from :func:`relocate_displacement`,
    the vacuum component is ``exp(-|g|^2 - Re(g^t Y^-1 X g)) / |det Y|``.
    """
    g = relocate_displacement(t.X, t.Y, t.z)
    yinv_x = np.linalg.solve(t.Y, t.X)
    expo = -np.vdot(g, g).real - (g @ yinv_x @ g).real
    return float(np.exp(expo) / abs(np.linalg.det(t.Y)))


def unitary_sqrt(u: np.ndarray) -> np.ndarray:
    """A square root of a unitary matrix that is itself unitary.

    Eigenphases are measured from the middle of their widest gap so that
    nearly equal eigenvalues never straddle the branch cut.
    """
    t, z = linalg.schur(np.asarray(u, dtype=complex), output="complex")
    ang = np.angle(np.diag(t))
    srt = np.sort(ang)
    gaps = np.diff(np.concatenate([srt, [srt[0] + 2 * np.pi]]))
    i = int(np.argmax(gaps))
    cut = srt[i] + 0.5 * gaps[i]
    theta = np.mod(ang - cut, 2 * np.pi) + cut
    return (z * np.exp(0.5j * theta)) @ z.conj().T


def takagi(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Takagi factorization ``b = Q diag(s) Q^t`` of a complex symmetric matrix.

    Uses the SVD together with the square root of the unitary linking its left
    and right singular vectors, which is block diagonal over degenerate
    singular values and therefore commutes with them.
    """
    b = np.asarray(b, dtype=complex)
    b = 0.5 * (b + b.T)
    u, s, vh = np.linalg.svd(b)
    return s, u @ unitary_sqrt(vh @ u.conj())


@dataclass(frozen=True)
class GaussianDecomposition:
    """Rotation-squeezing-rotation factors of a transform plus its displacements.

    ``X = C_L sinh(S) C_R^t`` and ``Y = C_L cosh(S) C_R^+``; ``gamma_prime``
    is the displacement moved to the right end and ``gamma_dprime =
    C_R^t gamma_prime`` are the coherent amplitudes entering the squeezers.
    """

    C_L: np.ndarray
    S: np.ndarray
    C_R: np.ndarray
    gamma: np.ndarray
    gamma_prime: np.ndarray
    gamma_dprime: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C_L", _frozen(self.C_L))
        object.__setattr__(self, "S", _frozen(self.S, float).reshape(-1))
        object.__setattr__(self, "C_R", _frozen(self.C_R))
        for name in ("gamma", "gamma_prime", "gamma_dprime"):
            object.__setattr__(self, name, _frozen(getattr(self, name)).reshape(-1))

    @property
    def dim(self) -> int:
        return self.S.shape[0]

    def reconstruct(self) -> BogoliubovTransform:
        """Transform with blocks rebuilt from the factors and displacement ``gamma``."""
        X = self.C_L @ np.diag(np.sinh(self.S)) @ self.C_R.T
        Y = self.C_L @ np.diag(np.cosh(self.S)) @ self.C_R.conj().T
        return BogoliubovTransform(X, Y, self.gamma)

    def as_circuit(self) -> BogoliubovTransform:
        """``R(C_L) S(S) R(C_R^+) D(gamma')`` composed from primitive operators."""
        return compose_all(
            from_rotation(self.C_L, tol=1e-8),
            from_squeezing(self.S),
            from_rotation(self.C_R.conj().T, tol=1e-8),
            from_displacement(self.gamma_prime),
        )

    def reconstruction_residuals(self, t: BogoliubovTransform) -> tuple[float, float]:
        r = self.reconstruct()
        return (
            float(np.max(np.abs(r.X - t.X))),
            float(np.max(np.abs(r.Y - t.Y))),
        )

    def unitarity_residuals(self) -> tuple[float, float]:
        return unitarity_residual(self.C_L), unitarity_residual(self.C_R)


def _fix_column_phases(c_l: np.ndarray, c_r: np.ndarray, s: np.ndarray, zero_tol: float):
    c_l = c_l.copy()
    c_r = c_r.copy()
    for k in range(c_l.shape[1]):
        pivot = c_l[np.argmax(np.abs(c_l[:, k])), k]
        if s[k] <= zero_tol:
            # Free phase: make the pivot real-positive.
            phase = np.conj(pivot) / abs(pivot)
        else:
            # Only a sign flip keeps both X and Y unchanged.
            ref = pivot.real if abs(pivot.real) > 1e-14 else pivot.imag
            phase = -1.0 if ref < 0 else 1.0
        c_l[:, k] *= phase
        c_r[:, k] *= phase
    return c_l, c_r


def decompose(
    t: BogoliubovTransform,
    constraint_tol: float = CONSTRAINT_TOL,
    reconstruction_tol: float = RECONSTRUCTION_TOL,
) -> GaussianDecomposition:
    """Split ``t`` into ``R(C_L) S(S) R(C_R^+)`` and relocate its displacement.

    ``X Y^t = C_L diag(sinh S cosh S) C_L^t`` is complex symmetric, so its
    Takagi factorization gives ``C_L`` and ``S``; then ``C_R = Y^+ C_L
    cosh(S)^-1``. Working from ``X Y^t`` rather than the SVD of ``Y`` keeps
    weakly squeezed modes apart: their singular values differ at first order
    in ``S`` instead of second. Squeezing is returned sorted descending.
    """
    t.check(constraint_tol)
    try:
        mu, c_l = takagi(t.X @ t.Y.T)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"Takagi factorization failed: {exc}") from exc
    s = 0.5 * np.arcsinh(2.0 * mu)
    c_r = t.Y.conj().T @ c_l / np.cosh(s)
    order = np.argsort(-s, kind="stable")
    s, c_l, c_r = s[order], c_l[:, order], c_r[:, order]
    c_l, c_r = _fix_column_phases(c_l, c_r, s, zero_tol=1e-14)

    gamma = np.array(t.z)
    gamma_prime = relocate_displacement(t.X, t.Y, gamma)
    dec = GaussianDecomposition(
        C_L=c_l,
        S=s,
        C_R=c_r,
        gamma=gamma,
        gamma_prime=gamma_prime,
        gamma_dprime=c_r.T @ gamma_prime,
    )
    rx, ry = dec.reconstruction_residuals(t)
    ul, ur = dec.unitarity_residuals()
    if max(rx, ry, ul, ur) > reconstruction_tol:
        raise NumericalFailure(
            f"decomposition residuals too large: X {rx:.2e}, Y {ry:.2e}, "
            f"C_L {ul:.2e}, C_R {ur:.2e}"
        )
    return dec
