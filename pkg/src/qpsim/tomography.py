"""State and process reconstruction from measured (or exact) count data.

Projector labels
----------------
Polarization: ``H V D A L R``. OAM: ``+2 -2 d+ d- dL dR`` with
``d+- = (|+2> +- |-2>)/sqrt(2)`` and ``dL,R = (|+2> +- i|-2>)/sqrt(2)``.

Two-qubit tomography uses the computational convention R -> 0, L -> 1 for
polarization and +2 -> 0, -2 -> 1 for OAM. Single-qubit reconstructions use
H -> 0, V -> 1 (or +2 -> 0, -2 -> 1), with Stokes axes
``x = (D, A)``, ``y = (L, R)``, ``z = (H, V)`` and their OAM analogues
``x = (d+, d-)``, ``y = (dL, dR)``, ``z = (+2, -2)``.

Count settings are labelled ``"<pol basis>|<oam basis>"`` with outcomes
``"<pol>,<oam>"`` for two qubits, e.g. setting ``"DA|dRL"`` outcome ``"A,dR"``.
Single-qubit settings are the basis names (``"HV"``, ``"DA"``, ``"LR"`` or
``"pm2"``, ``"dpm"``, ``"dLR"``) with the state label as outcome.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConvergenceError, DataError
from .measurement import CountRecord

S2 = 1.0 / math.sqrt(2.0)

#: Polarization states in the H/V basis.
POL_HV = {
    "H": np.array([1, 0], complex),
    "V": np.array([0, 1], complex),
    "D": np.array([S2, S2], complex),
    "A": np.array([S2, -S2], complex),
    "L": np.array([S2, 1j * S2], complex),
    "R": np.array([S2, -1j * S2], complex),
}

#: OAM qubit states in the (+2, -2) basis.
OAM_STATES = {
    "+2": np.array([1, 0], complex),
    "-2": np.array([0, 1], complex),
    "d+": np.array([S2, S2], complex),
    "d-": np.array([S2, -S2], complex),
    "dL": np.array([S2, 1j * S2], complex),
    "dR": np.array([S2, -1j * S2], complex),
}

# (R, L) computational coordinates of each polarization state
_TO_RL = np.array([[1, 1j], [1, -1j]]) * S2
POL_RL = {k: _TO_RL @ v for k, v in POL_HV.items()}

POL_BASES = {"HV": ("H", "V"), "DA": ("D", "A"), "LR": ("L", "R")}
OAM_BASES = {"pm2": ("+2", "-2"), "dpm": ("d+", "d-"), "dLR": ("dL", "dR")}

#: Stokes axes: (+1 outcome, -1 outcome, basis label) for x, y, z.
STOKES_AXES = {
    "pol": (("D", "A", "DA"), ("L", "R", "LR"), ("H", "V", "HV")),
    "oam": (("d+", "d-", "dpm"), ("dL", "dR", "dLR"), ("+2", "-2", "pm2")),
}

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], complex),
    np.array([[0, -1j], [1j, 0]], complex),
    np.array([[1, 0], [0, -1]], complex),
)
PAULI_LABELS = ("I", "X", "Y", "Z")


def _proj(v):
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class TomoSettings:
    """Projective measurement settings and optimizer controls."""

    projectors: Mapping[str, Mapping[str, np.ndarray]] = field(repr=False)
    likelihood: str = "multinomial"
    tol: float = 1e-9
    max_iter: int = 5000
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.likelihood not in ("multinomial", "poisson"):
            raise DataError(f"unknown likelihood model {self.likelihood!r}")
        if self.restarts < 0:
            raise DataError("restarts must be non-negative")
        stack = np.array([p.reshape(-1) for _, _, p in self.items()])
        if np.linalg.matrix_rank(stack, tol=1e-9) < self.dim**2:
            raise DataError("projector set is not informationally complete")

    @property
    def dim(self) -> int:
        first = next(iter(next(iter(self.projectors.values())).values()))
        return first.shape[0]

    def items(self):
        for s, outcomes in self.projectors.items():
            for o, p in outcomes.items():
                yield s, o, p

    def keys(self) -> list[tuple[str, str]]:
        return [(s, o) for s, o, _ in self.items()]

    def probabilities(self, rho) -> dict[tuple[str, str], float]:
        rho = np.asarray(rho)
        return {(s, o): float(np.real(np.trace(p @ rho))) for s, o, p in self.items()}

    def with_options(self, **kw) -> TomoSettings:
        return replace(self, **kw)

    @classmethod
    def two_qubit(cls, **kw) -> TomoSettings:
        projectors = {}
        for (pb, pols), (ob, oams) in itertools.product(POL_BASES.items(), OAM_BASES.items()):
            projectors[f"{pb}|{ob}"] = {
                f"{p},{o}": _proj(np.kron(POL_RL[p], OAM_STATES[o])) for p in pols for o in oams
            }
        return cls(projectors, **kw)

    @classmethod
    def single_qubit(cls, dof: str = "pol", **kw) -> TomoSettings:
        states = POL_HV if dof == "pol" else OAM_STATES
        bases = POL_BASES if dof == "pol" else OAM_BASES
        projectors = {b: {s: _proj(states[s]) for s in pair} for b, pair in bases.items()}
        return cls(projectors, **kw)


def counts_table(records: Iterable[CountRecord] | Mapping[tuple[str, str], float]) -> dict[tuple[str, str], float]:
    """Normalize count input to ``{(setting, outcome): count}``."""
    if isinstance(records, Mapping):
        return {k: float(v) for k, v in records.items()}
    table: dict[tuple[str, str], float] = {}
    for r in records:
        key = (r.setting, r.pattern)
        table[key] = table.get(key, 0.0) + r.counts
    return table


def missing_projectors(table: Mapping[tuple[str, str], float], settings: TomoSettings) -> list[tuple[str, str]]:
    return [k for k in settings.keys() if k not in table]


def _frequencies(table, settings):
    missing = missing_projectors(table, settings)
    if missing:
        raise DataError("missing projectors: " + ", ".join(f"{s}/{o}" for s, o in missing))
    freqs = {}
    for s, outcomes in settings.projectors.items():
        total = sum(table[(s, o)] for o in outcomes)
        if total <= 0:
            raise DataError(f"setting {s} has zero total counts")
        for o in outcomes:
            freqs[(s, o)] = table[(s, o)] / total
    return freqs


def _hermitian_basis(d):
    basis = []
    for i in range(d):
        m = np.zeros((d, d), complex)
        m[i, i] = 1
        basis.append(m)
    for i, j in itertools.combinations(range(d), 2):
        m = np.zeros((d, d), complex)
        m[i, j] = m[j, i] = S2
        basis.append(m)
        m = np.zeros((d, d), complex)
        m[i, j], m[j, i] = -1j * S2, 1j * S2
        basis.append(m)
    return basis


def linear_inversion(table, settings: TomoSettings) -> np.ndarray:
    """Least-squares Hermitian, unit-trace estimate (not necessarily positive)."""
    freqs = _frequencies(table, settings)
    basis = _hermitian_basis(settings.dim)
    keys = settings.keys()
    a = np.array([[np.real(np.trace(settings.projectors[s][o] @ b)) for b in basis] for s, o in keys])
    y = np.array([freqs[k] for k in keys])
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    rho = sum(c * b for c, b in zip(x, basis))
    return rho / np.trace(rho).real


def project_psd(rho) -> np.ndarray:
    """Closest unit-trace PSD matrix in Frobenius norm (eigenvalue simplex projection)."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    # project eigenvalues onto the probability simplex
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, len(u) + 1) > 0)[0][-1]
    theta = css[k] / (k + 1)
    lam = np.clip(w - theta, 0.0, None)
    return (v * lam) @ v.conj().T


def _unpack(x, d):
    t = np.zeros((d, d), complex)
    t[np.diag_indices(d)] = x[:d]
    rows, cols = np.tril_indices(d, -1)
    n = len(rows)
    t[rows, cols] = x[d:d + n] + 1j * x[d + n:d + 2 * n]
    return t


def _pack_grad(g, d):
    rows, cols = np.tril_indices(d, -1)
    return np.concatenate([g.real[np.diag_indices(d)], g.real[rows, cols], g.imag[rows, cols]])


def cholesky_params(rho) -> np.ndarray:
    """Parameters ``x`` of a lower-triangular ``T`` with ``T^dag T = rho``."""
    d = rho.shape[0]
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    b = (v * np.sqrt(np.clip(w, 0.0, None))).conj().T  # b^dag b = rho
    r, _ = scipy.linalg.rq(b.conj().T)  # b^dag = r q, r upper
    phases = np.exp(-1j * np.angle(np.where(np.abs(np.diag(r)) > 0, np.diag(r), 1)))
    r = r * phases[None, :]
    t = r.conj().T
    rows, cols = np.tril_indices(d, -1)
    return np.concatenate([np.diag(t).real, t.real[rows, cols], t.imag[rows, cols]])


def rho_from_params(x, d) -> np.ndarray:
    t = _unpack(x, d)
    a = t.conj().T @ t
    return a / np.trace(a).real


def _objective(settings: TomoSettings, table):
    d = settings.dim
    keys = [k for k in settings.keys() if table[k] > 0]
    projs = np.array([settings.projectors[s][o] for s, o in keys])
    n = np.array([table[k] for k in keys])
    scale = n.sum()
    n = n / scale
    setting_totals = {}
    for (s, o), v in zip(keys, n):
        setting_totals[s] = setting_totals.get(s, 0.0) + v
    # poisson: expected counts per setting proportional to that setting's total
    n_setting = np.array([setting_totals[s] for s, _ in keys])
    all_projs = np.array([settings.projectors[s][o] for s, o in settings.keys()])
    all_tot = np.array([setting_totals.get(s, 0.0) for s, _ in settings.keys()])
    poisson = settings.likelihood == "poisson"

    def f(x):
        t = _unpack(x, d)
        a = t.conj().T @ t
        tr = np.trace(a).real
        lam = np.maximum(np.einsum("kij,ji->k", projs, a).real, 1e-300)
        if poisson:
            lam_all = np.einsum("kij,ji->k", all_projs, a).real
            val = np.sum(n * np.log(lam)) - np.sum(all_tot * lam_all)
            g = np.einsum("k,kij->ij", n / lam, projs) - np.einsum("k,kij->ij", all_tot, all_projs)
        else:
            val = np.sum(n * np.log(lam)) - n.sum() * math.log(tr)
            g = np.einsum("k,kij->ij", n / lam, projs) - (n.sum() / tr) * np.eye(d)
        # d val = tr(g dA), dA = dT^dag T + T^dag dT -> grad_T = 2 (g T^dag)^T
        grad = 2.0 * (g @ t.conj().T).T.conj()
        return -val, -_pack_grad(grad, d)

    return f, scale, n_setting


@dataclass
class MLEResult:
    rho: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    starts: int


def log_likelihood(rho, table, settings: TomoSettings) -> float:
    """Multinomial log-likelihood ``sum n log p`` of ``rho``."""
    total = 0.0
    for s, o, p in settings.items():
        n = table.get((s, o), 0.0)
        if n > 0:
            total += n * math.log(max(np.real(np.trace(p @ rho)), 1e-300))
    return total


def mle_state_tomo(counts, settings: TomoSettings) -> MLEResult:
    """Maximum-likelihood density matrix over ``rho = T^dag T / tr(T^dag T)``.

    The first start is the PSD projection of the linear-inversion estimate;
    ``settings.restarts`` further starts are drawn from a generator seeded by
    ``settings.seed``. The best local optimum is returned.
    """
    table = counts_table(counts)
    missing = missing_projectors(table, settings)
    if missing:
        raise DataError("missing projectors: " + ", ".join(f"{s}/{o}" for s, o in missing))
    if any(v < 0 for v in table.values()):
        raise DataError("counts must be non-negative")
    d = settings.dim
    f, scale, _ = _objective(settings, table)
    rng = np.random.default_rng(settings.seed)
    starts = [cholesky_params(project_psd(linear_inversion(table, settings)))]
    starts += [rng.normal(size=d * d) for _ in range(settings.restarts)]
    best = None
    for x0 in starts:
        res = scipy.optimize.minimize(
            f, x0, jac=True, method="L-BFGS-B",
            options={"maxiter": settings.max_iter, "ftol": settings.tol * 1e-3, "gtol": 1e-10},
        )
        ok = bool(res.success) or float(np.linalg.norm(res.jac)) < 1e-6
        cand = (res.fun, ok, res)
        if best is None or (cand[1], -cand[0]) > (best[1], -best[0]):
            best = cand
    fun, ok, res = best
    rho = rho_from_params(res.x, d)
    rho = (rho + rho.conj().T) / 2
    result = MLEResult(rho, log_likelihood(rho, table, settings), ok, int(res.nit), len(starts))
    if not ok:
        raise ConvergenceError("maximum-likelihood optimizer did not converge", best=result)
    return result


def stokes_reconstruct(counts, dof: str = "pol") -> tuple[np.ndarray, np.ndarray]:
    """Bloch vector and 2x2 density matrix from six single-qubit counts.

    ``S_i = (N_i+ - N_i-) / (N_i+ + N_i-)``. Vectors longer than one are
    scaled back onto the sphere.
    """
    if dof not in STOKES_AXES:
        raise DataError(f"unknown degree of freedom {dof!r}")
    table = counts_table(counts)
    s = np.zeros(3)
    for i, (plus, minus, basis) in enumerate(STOKES_AXES[dof]):
        try:
            np_, nm = table[(basis, plus)], table[(basis, minus)]
        except KeyError:
            raise DataError(f"missing counts for basis {basis}") from None
        if np_ + nm <= 0:
            raise DataError(f"zero total counts in basis {basis}")
        s[i] = (np_ - nm) / (np_ + nm)
    r = np.linalg.norm(s)
    if r > 1:
        s = s / r
    rho = 0.5 * (PAULI[0] + s[0] * PAULI[1] + s[1] * PAULI[2] + s[2] * PAULI[3])
    return s, rho


def single_qubit_probabilities(rho, dof: str = "pol") -> dict[tuple[str, str], float]:
    """Born probabilities of the six projectors for a 2x2 state."""
    states = POL_HV if dof == "pol" else OAM_STATES
    out = {}
    for plus, minus, basis in STOKES_AXES[dof]:
        for label in (plus, minus):
            v = states[label]
            out[(basis, label)] = float(np.real(v.conj() @ rho @ v))
    return out


# ---------------------------------------------------------------- process


def _input_dm(label):
    if isinstance(label, str):
        try:
            return _proj(POL_HV[label])
        except KeyError:
            raise DataError(f"unknown input state {label!r}") from None
    return np.asarray(label, dtype=complex)


def _tp_constraint():
    """Real 4x16 map from Hermitian chi coordinates to Pauli coordinates of sum chi_mn E_n^dag E_m."""
    hb = _hermitian_basis(4)
    rows = []
    for b in hb:
        m = sum(b[i, j] * PAULI[j].conj().T @ PAULI[i] for i in range(4) for j in range(4))
        rows.append([np.real(np.trace(P @ m)) / 2 for P in PAULI])
    return np.array(rows).T, hb


@dataclass
class ProcessResult:
    chi: np.ndarray
    projection_distance: float
    iterations: int


def apply_chi(chi, rho) -> np.ndarray:
    return sum(chi[m, n] * PAULI[m] @ rho @ PAULI[n].conj().T for m in range(4) for n in range(4))


def process_tomo(input_labels: Sequence, output_dms: Sequence, tol: float = 1e-8, max_iter: int = 10_000) -> ProcessResult:
    """Pauli-basis chi matrix by linear inversion, then projection onto CPTP maps.

    The projection alternates eigenvalue clipping with the affine
    trace-preservation projection until both constraints hold to ``tol``.
    """
    if len(input_labels) != len(output_dms):
        raise DataError("need one output state per input state")
    rins = [_input_dm(l) for l in input_labels]
    routs = [np.asarray(r, dtype=complex) for r in output_dms]
    op_rank = np.linalg.matrix_rank(np.array([r.reshape(-1) for r in rins]), tol=1e-9)
    if op_rank < 4:
        raise DataError(f"input states span only {op_rank} of 4 operator dimensions")
    a = []
    y = []
    for rin, rout in zip(rins, routs):
        for i in range(2):
            for j in range(2):
                a.append([(PAULI[m] @ rin @ PAULI[n].conj().T)[i, j] for m in range(4) for n in range(4)])
                y.append(rout[i, j])
    x, *_ = np.linalg.lstsq(np.array(a), np.array(y), rcond=None)
    chi0 = x.reshape(4, 4)
    chi0 = (chi0 + chi0.conj().T) / 2

    m, hb = _tp_constraint()
    target = np.array([1.0, 0.0, 0.0, 0.0])  # Pauli coordinates tr(P I)/2 of the identity
    pinv = m.T @ np.linalg.inv(m @ m.T)

    def to_coords(c):
        return np.array([np.real(np.trace(b.conj().T @ c)) for b in hb])

    def from_coords(v):
        return sum(vi * b for vi, b in zip(v, hb))

    def tp_project(c):
        v = to_coords(c)
        v = v - pinv @ (m @ v - target)
        return from_coords(v)

    chi = chi0
    it = 0
    for it in range(1, max_iter + 1):
        w, vecs = np.linalg.eigh(chi)
        if w.min() >= -tol and _tp_error(chi) <= tol:
            break
        chi = (vecs * np.clip(w, 0.0, None)) @ vecs.conj().T
        chi = tp_project(chi)
        chi = (chi + chi.conj().T) / 2
    else:
        raise ConvergenceError("CPTP projection did not converge", best=chi)
    return ProcessResult(chi, float(np.linalg.norm(chi - chi0)), it)


def _tp_error(chi) -> float:
    s = sum(chi[m, n] * PAULI[n].conj().T @ PAULI[m] for m in range(4) for n in range(4))
    return float(np.max(np.abs(s - np.eye(2))))


def pauli_transfer_chi(unitary) -> np.ndarray:
    """Chi matrix of the unitary channel ``rho -> U rho U^dag``."""
    u = np.asarray(unitary, dtype=complex)
    c = np.array([np.trace(P.conj().T @ u) / 2 for P in PAULI])
    return np.outer(c, c.conj())
