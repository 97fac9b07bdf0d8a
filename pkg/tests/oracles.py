"""Independent reference implementations used by the tests.

Nothing here imports the simulator's algebra: amplitudes come from matrix
permanents, two-photon rates from first-quantized wavefunctions and the
concurrence from the textbook eigenvalue formula.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def permanent(m: np.ndarray) -> complex:
    n = m.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def occupations(n: int, m: int):
    """All occupation tuples of ``n`` photons in ``m`` modes."""
    for combo in itertools.combinations_with_replacement(range(m), n):
        occ = [0] * m
        for k in combo:
            occ[k] += 1
        yield tuple(occ)


def _expand(occ):
    return [k for k, c in enumerate(occ) for _ in range(c)]


def permanent_amplitudes(inputs: dict[tuple, complex], u: np.ndarray) -> dict[tuple, complex]:
    """Output amplitudes of a superposition of input occupations under ``u`` (out x in).

    ``<n_out| U |n_in> = perm(U[out_rows, in_cols]) / sqrt(prod n_in! prod n_out!)``.
    """
    out: dict[tuple, complex] = {}
    for occ_in, amp in inputs.items():
        n = sum(occ_in)
        cols = _expand(occ_in)
        norm_in = math.prod(math.factorial(c) for c in occ_in)
        for occ_out in occupations(n, u.shape[0]):
            rows = _expand(occ_out)
            norm_out = math.prod(math.factorial(c) for c in occ_out)
            a = permanent(u[np.ix_(rows, cols)]) / math.sqrt(norm_in * norm_out)
            out[occ_out] = out.get(occ_out, 0) + amp * a
    return out


def two_photon_coincidence(u1: np.ndarray, u2: np.ndarray, det_a, det_b, overlap: float) -> float:
    """Probability of one photon in modes ``det_a`` and one in ``det_b``.

    ``u1`` and ``u2`` are the output amplitude vectors of each photon,
    ``overlap`` is the real overlap of their temporal wavefunctions.
    """
    p = 0.0
    for c in det_a:
        for d in det_b:
            direct = u1[c] * u2[d]
            exchange = u1[d] * u2[c]
            p += abs(direct) ** 2 + abs(exchange) ** 2 + 2 * overlap**2 * (direct * np.conj(exchange)).real
    return float(p)


def wootters_concurrence(rho: np.ndarray) -> float:
    """Concurrence from the eigenvalues of ``rho (Y x Y) rho* (Y x Y)``."""
    y = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(y, y)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def random_density_matrix(rng, d: int = 4, rank: int | None = None) -> np.ndarray:
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, n: int) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_subunitary(rng, n_out: int, n_in: int) -> np.ndarray:
    """Random contraction: a block of a larger unitary."""
    big = random_unitary(rng, max(n_out, n_in) + 2)
    return big[:n_out, :n_in]
