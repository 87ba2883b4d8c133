"""Dense qubit-state utilities and second-quantized embeddings.

Qubit 0 is the first (most significant) tensor factor throughout.  Exact
complex-rational matrices are represented sparsely as dicts mapping (row, col)
to (Fraction real, Fraction imag) pairs; numeric code uses complex numpy
arrays.

For particle statistics, a qubit register of N qubits embeds into N particles
on d = 2N modes: 0-based qubit u occupies mode 2u when its bit is 0 and mode
2u + 1 when its bit is 1.  The 2-particle reduced density matrix follows the
convention rho2[(i,j),(k,l)] = <adag_k adag_l a_j a_i> / (N(N-1)), so its
trace over ordered pairs is 1/2.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

from gpsolve.polycore import _as_fraction

SparseComplex = Dict[Tuple[int, int], Tuple[Fraction, Fraction]]

PAULIS = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}

# exact single-qubit Paulis as {(i, j): (re, im)}
_F0, _F1 = Fraction(0), Fraction(1)
PAULIS_EXACT: Dict[int, SparseComplex] = {
    0: {(0, 0): (_F1, _F0), (1, 1): (_F1, _F0)},
    1: {(0, 1): (_F1, _F0), (1, 0): (_F1, _F0)},
    2: {(0, 1): (_F0, -_F1), (1, 0): (_F0, _F1)},
    3: {(0, 0): (_F1, _F0), (1, 1): (-_F1, _F0)},
}


def pauli_word_matrix(word: Sequence[int]) -> np.ndarray:
    """Unnormalized Pauli word as a dense complex matrix."""
    out = np.array([[1.0 + 0j]])
    for w in word:
        out = np.kron(out, PAULIS[w])
    return out


def pauli_word_exact(word: Sequence[int]) -> SparseComplex:
    """Unnormalized Pauli word as an exact sparse complex matrix."""
    out: SparseComplex = {(0, 0): (_F1, _F0)}
    for w in word:
        sigma = PAULIS_EXACT[w]
        new: SparseComplex = {}
        for (i, j), (re, im) in out.items():
            for (a, b), (sre, sim) in sigma.items():
                new[(2 * i + a, 2 * j + b)] = (
                    re * sre - im * sim,
                    re * sim + im * sre,
                )
        out = new
    return out


def embed_exact(op: SparseComplex, qubits: Sequence[int], n: int) -> SparseComplex:
    """Extend an exact operator on the given qubits by identity to n qubits."""
    qubits = list(qubits)
    rest = [q for q in range(n) if q not in qubits]
    out: SparseComplex = {}
    for (i, j), val in op.items():
        ibits = [(i >> (len(qubits) - 1 - t)) & 1 for t in range(len(qubits))]
        jbits = [(j >> (len(qubits) - 1 - t)) & 1 for t in range(len(qubits))]
        for rbits in itertools.product((0, 1), repeat=len(rest)):
            row = 0
            col = 0
            for q in range(n):
                if q in qubits:
                    t = qubits.index(q)
                    rb, cb = ibits[t], jbits[t]
                else:
                    rb = cb = rbits[rest.index(q)]
                row = (row << 1) | rb
                col = (col << 1) | cb
            out[(row, col)] = val
    return out


def sparse_to_dense(op: SparseComplex, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    for (i, j), (re, im) in op.items():
        out[i, j] = float(re) + 1j * float(im)
    return out


def partial_trace(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Trace out all qubits except ``keep`` (ascending order preserved)."""
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    for q in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    dim = 2 ** len(keep)
    return t.reshape(dim, dim)


def embed_operator(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Dense op on ``qubits`` extended by identity, in the full qubit order."""
    qubits = list(qubits)
    rest = [q for q in range(n) if q not in qubits]
    order = qubits + rest
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    full = full.reshape((2,) * (2 * n))
    perm = [order.index(q) for q in range(n)]
    full = full.transpose(perm + [p + n for p in perm])
    return full.reshape(2**n, 2**n)


def haar_random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def pauli_coefficients(rho: np.ndarray, nq: int) -> Dict[Tuple[int, ...], float]:
    """Coefficients a_w = Tr(P_w rho) in the orthonormal basis P_w = 2^{-nq/2} sigma_w."""
    norm = 2 ** (-nq / 2)
    out = {}
    for word in itertools.product(range(4), repeat=nq):
        out[word] = float(np.real(np.trace(pauli_word_matrix(word) @ rho))) * norm
    return out


def pauli_resynthesis(coeffs: Dict[Tuple[int, ...], float], nq: int) -> np.ndarray:
    norm = 2 ** (-nq / 2)
    out = np.zeros((2**nq, 2**nq), dtype=complex)
    for word, a in coeffs.items():
        out += a * norm * pauli_word_matrix(word)
    return out


# -- second quantization -------------------------------------------------------


def occupation_of_bits(bits: Sequence[int]) -> Tuple[int, ...]:
    """Occupation tuple on 2*len(bits) modes for a computational basis state."""
    occ = [0] * (2 * len(bits))
    for u, z in enumerate(bits):
        occ[2 * u + int(z)] = 1
    return tuple(occ)


def qubits_to_fock(psi: np.ndarray, n: int) -> Dict[Tuple[int, ...], complex]:
    """Embed an n-qubit state as an n-particle state on 2n modes."""
    state: Dict[Tuple[int, ...], complex] = {}
    for idx in range(2**n):
        amp = complex(psi[idx])
        if amp == 0:
            continue
        bits = [(idx >> (n - 1 - t)) & 1 for t in range(n)]
        state[occupation_of_bits(bits)] = amp
    return state


def _annihilate(
    state: Dict[Tuple[int, ...], complex], mode: int, fermion: bool
) -> Dict[Tuple[int, ...], complex]:
    out: Dict[Tuple[int, ...], complex] = {}
    for occ, amp in state.items():
        if occ[mode] == 0:
            continue
        phase = 1.0
        if fermion:
            phase = (-1.0) ** sum(occ[:mode])
        new = list(occ)
        new[mode] -= 1
        key = tuple(new)
        out[key] = out.get(key, 0.0) + phase * amp
    return out


def rdm2_entry(
    state: Dict[Tuple[int, ...], complex],
    i: int,
    j: int,
    k: int,
    l: int,
    n_particles: int,
    fermion: bool,
) -> complex:
    """<adag_k adag_l a_j a_i> / (N(N-1)) for a state with <=1 occupation per mode."""
    ket = _annihilate(_annihilate(state, i, fermion), j, fermion)
    bra = _annihilate(_annihilate(state, k, fermion), l, fermion)
    total = 0.0 + 0j
    for occ, amp in ket.items():
        other = bra.get(occ)
        if other is not None:
            total += np.conj(other) * amp
    return total / (n_particles * (n_particles - 1))


def mode_pairs(d: int, fermion: bool) -> List[Tuple[int, int]]:
    """Row/column index pairs of the 2-RDM: i<j for fermions, i<=j for bosons."""
    if fermion:
        return [(i, j) for i in range(d) for j in range(i + 1, d)]
    return [(i, j) for i in range(d) for j in range(i, d)]


def rdm2_matrix(
    state: Dict[Tuple[int, ...], complex], d: int, n_particles: int, fermion: bool
) -> np.ndarray:
    """Full 2-RDM over the ordered mode pairs of ``mode_pairs``."""
    pairs = mode_pairs(d, fermion)
    size = len(pairs)
    out = np.zeros((size, size), dtype=complex)
    for a, (i, j) in enumerate(pairs):
        for b, (k, l) in enumerate(pairs):
            out[a, b] = rdm2_entry(state, i, j, k, l, n_particles, fermion)
    return out


def rdm2_lookup(
    rho2: np.ndarray, d: int, fermion: bool
) -> "callable":
    """Entry accessor rho2[i,j,k,l] over arbitrary mode indices.

    Handles the pair ordering and, for fermions, the antisymmetry signs.
    """
    pairs = mode_pairs(d, fermion)
    index = {p: a for a, p in enumerate(pairs)}

    def entry(i: int, j: int, k: int, l: int) -> complex:
        sign = 1.0
        if fermion:
            if i == j or k == l:
                return 0.0 + 0j
            if i > j:
                i, j = j, i
                sign = -sign
            if k > l:
                k, l = l, k
                sign = -sign
        else:
            if i > j:
                i, j = j, i
            if k > l:
                k, l = l, k
        return sign * rho2[index[(i, j)], index[(k, l)]]

    return entry
