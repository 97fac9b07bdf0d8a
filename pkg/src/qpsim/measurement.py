"""Detection probabilities, count sampling and reduced qubit states.

Detectors ignore the wavepacket index: they are slow compared with the
coherence time, so temporal modes are always traced out.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, DomainError
from .fock import FockBasisState, ModeKey, PhotonicState

Ensemble = Sequence[tuple[float, PhotonicState]]


@dataclass(frozen=True)
class DetectorSpec:
    """A detector accepting photons on ``path``, optionally filtered by pol and OAM."""

    id: str
    path: str
    pol: str | None = None
    oam: int | None = None
    photon_number_resolving: bool = False

    def accepts(self, mode: ModeKey) -> bool:
        return (
            mode.path == self.path
            and (self.pol is None or mode.pol == self.pol)
            and (self.oam is None or mode.oam == self.oam)
        )

    def overlaps(self, other: DetectorSpec) -> bool:
        return (
            self.path == other.path
            and (self.pol is None or other.pol is None or self.pol == other.pol)
            and (self.oam is None or other.oam is None or self.oam == other.oam)
        )


@dataclass(frozen=True)
class CoincidencePattern:
    """Joint detection event.

    Non-resolving detectors need at least one photon. A detector listed in
    ``required`` (or flagged photon-number resolving) needs exactly the given
    count, defaulting to one.
    """

    detectors: tuple[DetectorSpec, ...]
    required: Mapping[str, int] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if not self.detectors:
            raise ConfigurationError("a coincidence pattern needs at least one detector")
        for i, a in enumerate(self.detectors):
            for b in self.detectors[i + 1:]:
                if a.overlaps(b):
                    raise ConfigurationError(f"detectors {a.id} and {b.id} accept overlapping modes")

    def matches(self, basis: FockBasisState) -> bool:
        for det in self.detectors:
            n = sum(c for m, c in basis.occupations if det.accepts(m))
            if det.id in self.required or det.photon_number_resolving:
                if n != self.required.get(det.id, 1):
                    return False
            elif n < 1:
                return False
        return True


def pattern(*detectors: DetectorSpec, label: str = "", **required: int) -> CoincidencePattern:
    return CoincidencePattern(tuple(detectors), dict(required), label)


def outcome_probability(state: PhotonicState, pat: CoincidencePattern, absolute: bool = False) -> float:
    """Probability of ``pat`` given survival of all post-selections.

    With ``absolute=True`` the result is multiplied by the state's success
    probability, giving the rate per input state.
    """
    if state.is_null:
        return 0.0
    p = sum(abs(a) ** 2 for b, a in state.amplitudes.items() if pat.matches(b))
    return float(p * state.success_probability) if absolute else float(p)


def ensemble_probability(ensemble: Ensemble, pat: CoincidencePattern) -> float:
    """Absolute probability of ``pat`` for a weighted mixture of states."""
    return float(sum(w * outcome_probability(s, pat, absolute=True) for w, s in ensemble))


@dataclass(frozen=True)
class CountRecord:
    setting: str
    pattern: str
    counts: int
    shots: int
    seed: int | None = None

    def __post_init__(self):
        if self.counts < 0 or self.counts > self.shots:
            raise DataError(f"counts {self.counts} outside [0, {self.shots}]")


def sample_counts(
    probabilities: Sequence[tuple[str, float]], shots: int, seed: int, setting: str = ""
) -> list[CountRecord]:
    """Multinomial draw of ``shots`` trials; the probability remainder is 'no detection'."""
    labels = [label for label, _ in probabilities]
    p = np.array([float(v) for _, v in probabilities])
    if shots < 0:
        raise DataError("shots must be non-negative")
    if np.any(~np.isfinite(p)) or np.any(p < -1e-12):
        raise DataError("probabilities must be finite and non-negative")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total > 1 + 1e-9:
        raise DataError(f"probabilities sum to {total} > 1")
    p = np.append(p, max(0.0, 1.0 - total))
    p /= p.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(shots, p)
    return [CountRecord(setting, label, int(n), int(shots), seed) for label, n in zip(labels, draws[:-1])]


COUNTS_HEADER = ["setting", "pattern", "counts", "shots", "seed"]


def write_counts_csv(records: Iterable[CountRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COUNTS_HEADER)
    for r in records:
        writer.writerow([r.setting, r.pattern, r.counts, r.shots, "" if r.seed is None else r.seed])


def read_counts_csv(fh) -> list[CountRecord]:
    text = fh.read() if hasattr(fh, "read") else str(fh)
    if not text.strip():
        raise DataError("counts file is empty")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != COUNTS_HEADER:
        raise DataError(f"counts header must be {','.join(COUNTS_HEADER)}")
    records = []
    for line, row in enumerate(reader, start=2):
        try:
            seed = row["seed"].strip()
            records.append(CountRecord(
                row["setting"].strip(), row["pattern"].strip(), int(row["counts"]), int(row["shots"]),
                int(seed) if seed else None,
            ))
        except (TypeError, ValueError) as exc:
            raise DataError(f"line {line}: {exc}") from exc
    if not records:
        raise DataError("counts file has no records")
    return records


#: Computational convention: qubit 1 is polarization with R -> 0,
#: L -> 1; qubit 2 is OAM with +2 -> 0, -2 -> 1.
QUBIT_MAP = {"pol": ("R", "L"), "oam": (2, -2)}

_CIRC_FROM_HV = {
    # <R|psi> and <L|psi> from (a_H, a_V)
    "R": np.array([1, 1j]) / math.sqrt(2),
    "L": np.array([1, -1j]) / math.sqrt(2),
    "H": np.array([1, 0]),
    "V": np.array([0, 1]),
}


def _single_photon_blocks(state: PhotonicState):
    """Group a one-photon state's amplitudes by (path, oam, wavepacket) -> (a_H, a_V)."""
    if state.is_null:
        raise DomainError("state is null")
    if state.n_photons != 1:
        raise DomainError(f"expected a single-photon state, got {state.n_photons} photons")
    blocks: dict[tuple[str, int, int], np.ndarray] = {}
    for basis, amp in state.amplitudes.items():
        (mode, _), = basis.occupations
        key = (mode.path, mode.oam, mode.wavepacket)
        vec = blocks.setdefault(key, np.zeros(2, dtype=complex))
        vec[0 if mode.pol == "H" else 1] += amp
    return blocks


def _qubit_vector(state: PhotonicState, qubit_map) -> tuple[dict, float]:
    pol_basis = [np.asarray(_CIRC_FROM_HV[p]) for p in qubit_map["pol"]]
    oam_values = tuple(qubit_map["oam"])
    vectors: dict[tuple[str, int], np.ndarray] = {}
    inside = 0.0
    for (path, oam, w), hv in _single_photon_blocks(state).items():
        if oam not in oam_values:
            continue
        v = vectors.setdefault((path, w), np.zeros(4, dtype=complex))
        j = oam_values.index(oam)
        for i, proj in enumerate(pol_basis):
            v[2 * i + j] += proj @ hv
    for v in vectors.values():
        inside += float(np.vdot(v, v).real)
    return vectors, inside


def reduced_two_qubit_dm(state: PhotonicState, qubit_map=QUBIT_MAP) -> tuple[np.ndarray, float]:
    """Polarization x OAM density matrix of a single photon.

    Returns ``(rho, leakage)`` where ``rho`` is the 4x4 matrix in the basis
    ``|00>, |01>, |10>, |11>`` under ``qubit_map`` (path and wavepacket traced
    out) and ``leakage`` is the population outside the qubit subspace.
    """
    vectors, inside = _qubit_vector(state, qubit_map)
    if inside <= 0:
        raise DomainError("no population inside the qubit subspace")
    rho = sum(np.outer(v, v.conj()) for v in vectors.values()) / inside
    rho = (rho + rho.conj().T) / 2
    return rho, max(0.0, 1.0 - inside)


def ensemble_two_qubit_dm(ensemble: Ensemble, qubit_map=QUBIT_MAP) -> tuple[np.ndarray, float, float]:
    """Mixture of reduced states weighted by ensemble weight and survival.

    Returns ``(rho, leakage, qubit_probability)`` where the last entry is the
    absolute probability of finding the photon in the qubit subspace.
    """
    acc = np.zeros((4, 4), dtype=complex)
    total = 0.0
    weight = 0.0
    for w, s in ensemble:
        if s.is_null:
            continue
        vectors, inside = _qubit_vector(s, qubit_map)
        scale = w * s.success_probability
        acc += scale * sum((np.outer(v, v.conj()) for v in vectors.values()), np.zeros((4, 4), complex))
        total += scale * inside
        weight += scale
    if total <= 0:
        raise DomainError("no population inside the qubit subspace")
    rho = acc / total
    return (rho + rho.conj().T) / 2, max(0.0, 1.0 - total / weight), total


def single_qubit_dm(ensemble: Ensemble, dof: str, path: str | None = None) -> tuple[np.ndarray, float]:
    """Reduced 2x2 state of one photon's polarization (H, V) or OAM (+2, -2).

    The other degree of freedom, the path and the wavepacket are traced out.
    For ``dof="oam"`` OAM values other than +-2 are excluded. Returns
    ``(rho, probability)`` with the absolute probability of the retained
    population.
    """
    if dof == "pol":
        acc = np.zeros((2, 2), dtype=complex)
        for w, s in ensemble:
            if s.is_null:
                continue
            for (p, _, _), hv in _single_photon_blocks(s).items():
                if path is None or p == path:
                    acc += w * s.success_probability * np.outer(hv, hv.conj())
    elif dof == "oam":
        acc = _oam_coherent(ensemble, path)
    else:
        raise DomainError("dof must be 'pol' or 'oam'")
    prob = float(np.trace(acc).real)
    if prob <= 0:
        raise DomainError("no population in the requested subspace")
    rho = acc / prob
    return (rho + rho.conj().T) / 2, prob


def _oam_coherent(ensemble: Ensemble, path: str | None) -> np.ndarray:
    """OAM (+2, -2) block traced over polarization, path and wavepacket coherently."""
    acc = np.zeros((2, 2), dtype=complex)
    for w, s in ensemble:
        if s.is_null:
            continue
        vecs: dict[tuple[str, str, int], np.ndarray] = {}
        for basis, amp in s.amplitudes.items():
            (mode, _), = basis.occupations
            if path is not None and mode.path != path:
                continue
            if mode.oam not in (2, -2):
                continue
            v = vecs.setdefault((mode.path, mode.pol, mode.wavepacket), np.zeros(2, dtype=complex))
            v[0 if mode.oam == 2 else 1] += amp
        scale = w * s.success_probability
        for v in vecs.values():
            acc += scale * np.outer(v, v.conj())
    return acc


def density_matrix_to_json(rho: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(rho)]


def density_matrix_from_json(data) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise DataError(f"malformed matrix: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError("matrix must be square")
    return m
