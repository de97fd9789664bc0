r"""Truncated Fock-space simulation of the compiled circuit.

The circuit prepares single-mode squeezed coherent states and sends them
through a passive interferometer. The interferometer conserves the total
photon number, so the state is handled as a list of blocks, one per total
photon number ``N``. The interferometer is factored into nearest-neighbour
2x2 unitaries and a diagonal phase; inside a block each 2x2 factor mixes only
patterns that agree on the other modes, through a small matrix per pair
photon count. This is exact to rounding for every pattern in the block.

A per-mode cutoff ``n_max`` keeps output patterns inside the box
``[0, n_max]^d``. Probabilities of those patterns are exact because every
block up to ``d * n_max`` is propagated in full.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, sparse

from .errors import (
    DimensionMismatch,
    EmptyTable,
    InsufficientTruncation,
    ValidationError,
)
from .gaussian_core import check_unitary

log = logging.getLogger(__name__)

# Blocks whose input probability is below this are skipped; the loss is
# reported through captured_mass.
BLOCK_SKIP_MASS = 1e-18
DEFAULT_MEMORY_BYTES = 2 * 1024**3
ADAPTIVE_START = 8


# ---------------------------------------------------------------------------
# single-mode states


def squeezed_coherent_state(s: float, gamma: complex, n_max: int) -> np.ndarray:
    r"""Fock amplitudes of ``S(s) D(gamma) |0>`` for ``n = 0..n_max``.

    The state is annihilated by ``cosh(s) a - sinh(s) a^+ - gamma``, giving the
    recursion ``psi[n+1] = (gamma psi[n] + sinh(s) sqrt(n) psi[n-1]) /
    (cosh(s) sqrt(n+1))`` seeded with the exact vacuum overlap
    ``exp(-|gamma|^2/2 - tanh(s) gamma^2/2) / sqrt(cosh s)``.
    """
    if n_max < 0:
        raise ValidationError("n_max must be >= 0")
    ch, sh = math.cosh(s), math.sinh(s)
    gamma = complex(gamma)
    psi = np.zeros(n_max + 1, dtype=complex)
    psi[0] = np.exp(-0.5 * abs(gamma) ** 2 - 0.5 * math.tanh(s) * gamma**2) / math.sqrt(ch)
    if n_max >= 1:
        psi[1] = gamma * psi[0] / ch
    for n in range(1, n_max):
        psi[n + 1] = (gamma * psi[n] + sh * math.sqrt(n) * psi[n - 1]) / (ch * math.sqrt(n + 1))
    return psi


# ---------------------------------------------------------------------------
# photon-number blocks


@lru_cache(maxsize=256)
def _block_patterns(total: int, modes: int) -> np.ndarray:
    """All patterns of ``modes`` non-negative integers summing to ``total``, lexicographic."""
    if modes == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        parts = []
        for first in range(total + 1):
            rest = _block_patterns(total - first, modes - 1)
            parts.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
        out = np.vstack(parts)
    out.setflags(write=False)
    return out


def block_patterns(total: int, modes: int) -> np.ndarray:
    return _block_patterns(int(total), int(modes))


def _keys(patterns: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(patterns.shape[1] - 1, -1, -1, dtype=np.int64)
    return patterns @ weights


def number_conserving_generator(a: np.ndarray, patterns: np.ndarray) -> sparse.csr_matrix:
    """Matrix of ``sum_jk a[j, k] b_j^+ b_k`` on one photon-number block."""
    n_pat, d = patterns.shape
    total = int(patterns[0].sum()) if n_pat else 0
    base = total + 1
    keys = _keys(patterns, base)
    rows, cols, vals = [], [], []
    idx = np.arange(n_pat)
    for j in range(d):
        for k in range(d):
            coef = a[j, k]
            if coef == 0:
                continue
            if j == k:
                rows.append(idx)
                cols.append(idx)
                vals.append(coef * patterns[:, j].astype(float))
                continue
            mask = patterns[:, k] > 0
            src = idx[mask]
            tgt_pat = patterns[mask].copy()
            amp = np.sqrt(tgt_pat[:, k] * (tgt_pat[:, j] + 1.0))
            tgt_pat[:, k] -= 1
            tgt_pat[:, j] += 1
            tgt = np.searchsorted(keys, _keys(tgt_pat, base))
            rows.append(tgt)
            cols.append(src)
            vals.append(coef * amp)
    if not rows:
        return sparse.csr_matrix((n_pat, n_pat), dtype=complex)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_pat, n_pat),
        dtype=complex,
    )


def interferometer_generator(u: np.ndarray) -> np.ndarray:
    """Principal ``log(conj(U))``, the one-photon generator of ``R_U``."""
    w = np.asarray(u, dtype=complex).conj()
    t, z = linalg.schur(w, output="complex")
    return z @ np.diag(np.log(np.diag(t))) @ z.conj().T


def givens_factors(u) -> tuple[list[tuple[int, int, np.ndarray]], np.ndarray]:
    """Factor ``U = T_1 T_2 ... T_L diag(phases)`` into nearest-neighbour 2x2 unitaries.

    Each factor is ``(i, i + 1, t)`` with ``t`` the 2x2 block acting on modes
    ``i`` and ``i + 1``. Since ``R_{AB} = R_A R_B``, the Fock-space operator
    factorizes the same way.
    """
    w = np.array(u, dtype=complex)
    d = w.shape[0]
    eliminations = []
    for col in range(d - 1):
        for row in range(d - 1, col, -1):
            a, b = w[row - 1, col], w[row, col]
            if b == 0:
                continue
            r = math.hypot(abs(a), abs(b))
            g = np.array([[np.conj(a), np.conj(b)], [-b, a]]) / r
            w[[row - 1, row], :] = g @ w[[row - 1, row], :]
            eliminations.append((row - 1, row, g.conj().T))
    return eliminations, np.diag(w).copy()


@lru_cache(maxsize=1024)
def _two_mode_block(t_key: tuple, total: int) -> np.ndarray:
    t = np.array(t_key, dtype=complex).reshape(2, 2)
    # -i log(conj t) is Hermitian, so its block generator diagonalizes stably.
    h = -1j * number_conserving_generator(interferometer_generator(t), block_patterns(total, 2)).toarray()
    evals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (vecs * np.exp(1j * evals)) @ vecs.conj().T


def two_mode_block(t: np.ndarray, total: int) -> np.ndarray:
    """``R_t`` on the ``total``-photon states ``(k, total - k)`` of two modes, indexed by ``k``."""
    t = np.asarray(t, dtype=complex)
    return _two_mode_block(tuple(np.round(t.reshape(-1), 17).tolist()), int(total))


def _pair_groups(patterns: np.ndarray, i: int, j: int) -> list[tuple[int, np.ndarray]]:
    """Row indices grouped by the photon count ``K`` shared by modes ``i`` and ``j``.

    For each ``K`` returns an index array of shape ``(groups, K + 1)`` whose
    column is the photon number in mode ``i``; rows share all other modes.
    """
    d = patterns.shape[1]
    pair = patterns[:, i] + patterns[:, j]
    others = np.delete(patterns, [i, j], axis=1)
    base = int(patterns[0].sum()) + 1 if patterns.shape[0] else 1
    okey = _keys(others, base) if d > 2 else np.zeros(patterns.shape[0], dtype=np.int64)
    out = []
    for k in np.unique(pair):
        rows = np.nonzero(pair == k)[0]
        order = np.lexsort((patterns[rows, i], okey[rows]))
        out.append((int(k), rows[order].reshape(-1, int(k) + 1)))
    return out


class BlockInterferometer:
    """Applies ``R_U`` to photon-number blocks through its Givens factors."""

    def __init__(self, u):
        self.u = np.asarray(u, dtype=complex)
        self.factors, self.phases = givens_factors(self.u)

    def apply(self, vec: np.ndarray, patterns: np.ndarray) -> np.ndarray:
        out = np.array(vec, dtype=complex)
        if patterns.shape[0] == 0 or int(patterns[0].sum()) == 0:
            return out
        # R_U = R_T1 ... R_TL R_D: the diagonal acts first; amplitudes pick up conj(phase)^n.
        out *= np.prod(np.conj(self.phases)[None, :] ** patterns, axis=1)
        groups: dict[tuple[int, int], list] = {}
        for i, j, t in reversed(self.factors):
            if (i, j) not in groups:
                groups[(i, j)] = _pair_groups(patterns, i, j)
            for k, idx in groups[(i, j)]:
                if k == 0:
                    continue
                out[idx] = out[idx] @ two_mode_block(t, k).T
        return out


def apply_to_block(u, vec: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    return BlockInterferometer(u).apply(vec, patterns)


def apply_interferometer(state: np.ndarray, u, tol: float = 1e-10, max_total: int | None = None) -> np.ndarray:
    """Apply ``R_U`` to a dense amplitude tensor of shape ``(c+1,) * d``.

    Only components with total photon number ``<= max_total`` (default ``c``)
    are propagated; those stay inside the tensor, so the norm of a state
    supported there is preserved exactly. Higher components are dropped.
    """
    u = check_unitary(u, tol)
    state = np.asarray(state, dtype=complex)
    d = state.ndim
    if u.shape != (d, d):
        raise DimensionMismatch(f"unitary of shape {u.shape} for a {d}-mode state")
    cutoff = state.shape[0] - 1
    if any(n != cutoff + 1 for n in state.shape):
        raise DimensionMismatch("state tensor must have the same cutoff in every mode")
    max_total = cutoff if max_total is None else int(max_total)
    engine = BlockInterferometer(u)
    out = np.zeros_like(state)
    for total in range(max_total + 1):
        pats = block_patterns(total, d)
        inside = np.all(pats <= cutoff, axis=1)
        vec = np.zeros(pats.shape[0], dtype=complex)
        vec[inside] = state[tuple(pats[inside].T)]
        if not np.any(vec):
            continue
        res = engine.apply(vec, pats)
        out[tuple(pats[inside].T)] = res[inside]
    return out


# ---------------------------------------------------------------------------
# permanents (independent oracle for the block matrices)


def ryser_permanent(a: np.ndarray) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula with Gray-code updates."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    for k in range(1, 2**n):
        bit = (k & -k).bit_length() - 1
        gray = k ^ (k >> 1)
        if gray & (1 << bit):
            row_sums += a[:, bit]
        else:
            row_sums -= a[:, bit]
        sign = -1 if bin(gray).count("1") % 2 else 1
        total += sign * np.prod(row_sums)
    return (-1) ** n * total


def multiphoton_matrix(u, total: int) -> tuple[np.ndarray, np.ndarray]:
    """Block of ``R_U`` at ``total`` photons from permanents of ``conj(U)``.

    Returns the patterns and the matrix ``<m|R_U|n>`` in that order.
    """
    w = np.asarray(u, dtype=complex).conj()
    d = w.shape[0]
    pats = block_patterns(total, d)
    out = np.empty((pats.shape[0], pats.shape[0]), dtype=complex)
    facts = np.array([np.prod([math.factorial(x) for x in p]) for p in pats], dtype=float)
    for i, m in enumerate(pats):
        rows = np.repeat(np.arange(d), m)
        for j, n in enumerate(pats):
            cols = np.repeat(np.arange(d), n)
            out[i, j] = ryser_permanent(w[np.ix_(rows, cols)]) / math.sqrt(facts[i] * facts[j])
    return pats, out


# ---------------------------------------------------------------------------
# transition table


@dataclass(frozen=True)
class TruncationPolicy:
    """Per-mode photon cutoff and the probability mass it must capture.

    With ``n_max=None`` the cutoff starts at 8 and doubles until
    ``target_mass`` is reached or the memory ceiling would be exceeded.
    """

    n_max: int | None = None
    target_mass: float = 0.999
    memory_bytes: int = DEFAULT_MEMORY_BYTES

    def __post_init__(self):
        if self.n_max is not None and (int(self.n_max) != self.n_max or self.n_max < 0):
            raise ValidationError("n_max must be a non-negative integer")
        if not (0.0 < self.target_mass <= 1.0):
            raise ValidationError("target_mass must lie in (0, 1]")


@dataclass(frozen=True)
class TransitionTable:
    """Joint output probabilities ``P(m, n)`` over system and ancilla patterns.

    ``patterns`` has one row per entry (system modes first, then ancilla
    modes) in lexicographic order; ``system_modes`` tells where to split.
    """

    patterns: np.ndarray
    probabilities: np.ndarray
    system_modes: int
    n_max: int
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)

    def __post_init__(self):
        pats = np.array(self.patterns, dtype=np.int64, ndmin=2)
        probs = np.array(self.probabilities, dtype=float).reshape(-1)
        if pats.shape[0] != probs.shape[0]:
            raise DimensionMismatch("patterns and probabilities differ in length")
        for name, arr in (("patterns", pats), ("probabilities", probs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def captured_mass(self) -> float:
        return float(self.probabilities.sum())

    @property
    def modes(self) -> int:
        return self.patterns.shape[1]

    @property
    def m(self) -> np.ndarray:
        return self.patterns[:, : self.system_modes]

    @property
    def n(self) -> np.ndarray:
        return self.patterns[:, self.system_modes :]

    @property
    def entries(self) -> dict[tuple[tuple[int, ...], tuple[int, ...]], float]:
        k = self.system_modes
        return {
            (tuple(int(x) for x in p[:k]), tuple(int(x) for x in p[k:])): float(q)
            for p, q in zip(self.patterns, self.probabilities)
        }

    def probability(self, m, n=()) -> float:
        key = np.concatenate([np.asarray(m, dtype=np.int64), np.asarray(n, dtype=np.int64)])
        hit = np.all(self.patterns == key, axis=1)
        return float(self.probabilities[hit].sum())

    def ancilla_marginal(self) -> dict[tuple[int, ...], float]:
        out: dict[tuple[int, ...], float] = {}
        for row, p in zip(self.n, self.probabilities):
            key = tuple(int(x) for x in row)
            out[key] = out.get(key, 0.0) + float(p)
        return out

    def photon_moments(self, normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Per-mode mean photon numbers and their covariance over the table."""
        p = self.probabilities
        if normalize:
            p = p / p.sum()
        x = self.patterns.astype(float)
        mean = p @ x
        second = x.T @ (x * p[:, None])
        return mean, second - np.outer(mean, mean)


def _input_amplitudes(circuit, n_tot: int) -> list[np.ndarray]:
    return [
        squeezed_coherent_state(s, g, n_tot)
        for s, g in zip(circuit.squeezing, circuit.input_amplitudes)
    ]


def _block_mass(amps: list[np.ndarray], n_tot: int) -> np.ndarray:
    dist = np.array([1.0])
    for a in amps:
        dist = np.convolve(dist, np.abs(a) ** 2)[: n_tot + 1]
    return np.pad(dist, (0, n_tot + 1 - dist.shape[0]))


def _estimate_bytes(d: int, n_max: int) -> int:
    n_tot = d * n_max
    largest = math.comb(n_tot + d - 1, d - 1)
    # cached pattern arrays of every block, plus per-pair index arrays and
    # work vectors for the largest block, plus the in-box output table
    cached = math.comb(n_tot + d, d) * d * 8
    return int(cached + largest * (d * 8 + 6 * 16) + (n_max + 1) ** d * (d * 8 + 8))


def _table_at(circuit, n_max: int, system_modes: int, policy: TruncationPolicy) -> TransitionTable:
    d = circuit.modes
    n_tot = d * n_max
    amps = _input_amplitudes(circuit, n_tot)
    block_mass = _block_mass(amps, n_tot)
    engine = BlockInterferometer(circuit.interferometer)
    pats_out, probs_out = [], []
    for total in range(n_tot + 1):
        if block_mass[total] < BLOCK_SKIP_MASS:
            continue
        pats = block_patterns(total, d)
        inside = np.all(pats <= n_max, axis=1)
        if not np.any(inside):
            continue
        vec = np.ones(pats.shape[0], dtype=complex)
        for k in range(d):
            vec *= amps[k][pats[:, k]]
        res = engine.apply(vec, pats)
        pats_out.append(pats[inside])
        probs_out.append(np.abs(res[inside]) ** 2)
    pats = np.vstack(pats_out) if pats_out else np.zeros((0, d), dtype=np.int64)
    probs = np.concatenate(probs_out) if probs_out else np.zeros(0)
    order = np.lexsort(pats.T[::-1])
    return TransitionTable(pats[order], probs[order], system_modes, n_max, policy)


def transition_table(circuit, policy: TruncationPolicy | None = None, system_modes: int | None = None) -> TransitionTable:
    """Exact joint photon-pattern probabilities of ``circuit`` inside the cutoff box.

    ``system_modes`` defaults to half the circuit modes (purified layout).
    Raises :class:`InsufficientTruncation` when the captured probability stays
    below ``policy.target_mass``.
    """
    policy = policy or TruncationPolicy()
    d = circuit.modes
    if system_modes is None:
        system_modes = d // 2 if d % 2 == 0 else d
    if policy.n_max is not None:
        if _estimate_bytes(d, policy.n_max) > policy.memory_bytes:
            raise InsufficientTruncation(
                f"n_max={policy.n_max} on {d} modes exceeds the memory ceiling", 0.0, policy.n_max
            )
        table = _table_at(circuit, policy.n_max, system_modes, policy)
    else:
        n_max = ADAPTIVE_START
        table = None
        while True:
            if _estimate_bytes(d, n_max) > policy.memory_bytes:
                mass = table.captured_mass if table is not None else 0.0
                raise InsufficientTruncation(
                    f"memory ceiling reached before capturing {policy.target_mass} "
                    f"(captured {mass:.6g} at n_max={n_max // 2})",
                    mass,
                    n_max // 2,
                )
            table = _table_at(circuit, n_max, system_modes, policy)
            log.debug("n_max=%d captured %.12f", n_max, table.captured_mass)
            if table.captured_mass >= policy.target_mass:
                break
            n_max *= 2
    if table.captured_mass < policy.target_mass:
        raise InsufficientTruncation(
            f"captured mass {table.captured_mass:.6g} < target {policy.target_mass} "
            f"at n_max={table.n_max}",
            table.captured_mass,
            table.n_max,
        )
    return table


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class Spectrum:
    """Binned Franck-Condon profile plus the exact sticks it was built from."""

    bin_width: float
    centers: np.ndarray
    intensities: np.ndarray
    stick_omega: np.ndarray
    stick_probability: np.ndarray
    stick_index: np.ndarray

    @property
    def bins(self) -> list[tuple[float, float]]:
        return list(zip(self.centers.tolist(), self.intensities.tolist()))

    @property
    def normalization(self) -> float:
        return float(self.intensities.sum())


def transition_energies(patterns, omega_final, omega_initial) -> np.ndarray:
    """``omega_v = m . omega' - n . omega`` for joint patterns (system modes first)."""
    patterns = np.asarray(patterns)
    wp = np.asarray(omega_final, dtype=float)
    w = np.asarray(omega_initial, dtype=float)
    k = wp.shape[0]
    return patterns[:, :k] @ wp - patterns[:, k : 2 * k] @ w


def build_fcp(table: TransitionTable, mol, bin_width: float = 10.0) -> Spectrum:
    if bin_width <= 0:
        raise ValidationError("bin_width must be > 0")
    if table.system_modes != mol.modes or table.modes != 2 * mol.modes:
        raise DimensionMismatch("table and molecule disagree on the number of modes")
    omega_v = transition_energies(table.patterns, mol.omega_final, mol.omega_initial)
    probs = np.array(table.probabilities)
    if probs.size == 0:
        return Spectrum(bin_width, np.zeros(0), np.zeros(0), omega_v, probs, np.zeros(0, dtype=np.int64))
    idx = np.rint(omega_v / bin_width).astype(np.int64)
    lo, hi = int(idx.min()), int(idx.max())
    intensities = np.zeros(hi - lo + 1)
    np.add.at(intensities, idx - lo, probs)
    centers = np.arange(lo, hi + 1) * bin_width
    return Spectrum(bin_width, centers, intensities, omega_v, probs, np.arange(probs.size))


# ---------------------------------------------------------------------------
# sampling


def sample(table: TransitionTable, count: int, seed: int) -> np.ndarray:
    """I.i.d. patterns from the renormalized table by inverse CDF.

    Returns an integer array of shape ``(count, modes)``.
    """
    if count < 0:
        raise ValidationError("count must be >= 0")
    mass = table.captured_mass
    if table.probabilities.size == 0 or not mass > 0:
        raise EmptyTable("cannot sample from an empty table")
    cdf = np.cumsum(table.probabilities)
    rng = np.random.default_rng(seed)
    u = rng.random(count) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    return np.array(table.patterns[idx])


# ---------------------------------------------------------------------------
# direct truncated-operator path (small instances only)


def ladder_operators(modes: int, cutoff: int) -> list[np.ndarray]:
    """Dense annihilation operators of each mode on ``(cutoff+1)^modes`` states."""
    a1 = np.diag(np.sqrt(np.arange(1, cutoff + 1)), 1).astype(complex)
    eye = np.eye(cutoff + 1)
    ops = []
    for k in range(modes):
        mats = [a1 if j == k else eye for j in range(modes)]
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        ops.append(op)
    return ops


def displacement_operator(ops, alpha) -> np.ndarray:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    gen = sum(al * a.conj().T - np.conj(al) * a for al, a in zip(alpha, ops))
    return linalg.expm(gen)


def squeezing_operator(ops, sigma) -> np.ndarray:
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    gen = sum(0.5 * s * (a.conj().T @ a.conj().T - a @ a) for s, a in zip(sigma, ops))
    return linalg.expm(gen)


def rotation_operator(ops, u) -> np.ndarray:
    a_gen = interferometer_generator(u)
    d = len(ops)
    gen = sum(a_gen[j, k] * ops[j].conj().T @ ops[k] for j in range(d) for k in range(d))
    return linalg.expm(gen)


def direct_circuit_probabilities(decomposition, cutoff: int, left_displacement: bool = True) -> np.ndarray:
    """Output probabilities from explicit operator matrices on a truncated space.

    With ``left_displacement`` the state is ``D(conj(gamma)) R S R |0>``;
    otherwise ``R S R D(gamma') |0>``. Returned as a tensor ``(cutoff+1,)*d``.
    Only patterns well below ``cutoff`` are trustworthy.
    """
    dec = decomposition
    d = dec.dim
    ops = ladder_operators(d, cutoff)
    vac = np.zeros((cutoff + 1) ** d, dtype=complex)
    vac[0] = 1.0
    u0 = (
        rotation_operator(ops, dec.C_L)
        @ squeezing_operator(ops, dec.S)
        @ rotation_operator(ops, dec.C_R.conj().T)
    )
    if left_displacement:
        psi = displacement_operator(ops, dec.gamma.conj()) @ (u0 @ vac)
    else:
        psi = u0 @ (displacement_operator(ops, dec.gamma_prime) @ vac)
    return (np.abs(psi) ** 2).reshape((cutoff + 1,) * d)


def all_patterns(modes: int, cutoff: int) -> np.ndarray:
    """Every pattern in ``[0, cutoff]^modes`` in lexicographic order."""
    return np.array(list(itertools.product(range(cutoff + 1), repeat=modes)), dtype=np.int64).reshape(-1, modes)
