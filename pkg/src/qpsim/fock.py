"""Multimode bosonic Fock states with labelled modes.

A mode is identified by ``(path, pol, oam, wavepacket)``. Polarization is
stored in the linear H/V basis only; circular states are superpositions with
``L = (H + iV)/sqrt(2)`` and ``R = (H - iV)/sqrt(2)``.

States are immutable. Every operation returns a new, normalized state; any
norm removed by a lossy step is folded into ``success_probability``.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .constants import N_MAX, PRUNE_TOL
from .errors import CapacityError, DomainError, ParameterError

POLARIZATIONS = ("H", "V")


@dataclass(frozen=True, order=True)
class ModeKey:
    """Label of a single bosonic mode.

    Ordering is lexicographic on (path, pol, oam, wavepacket), which is the
    canonical order used for serialization.
    """

    path: str
    pol: str
    oam: int = 0
    wavepacket: int = 0

    def __post_init__(self):
        if self.pol not in POLARIZATIONS:
            raise ParameterError(f"pol must be 'H' or 'V', got {self.pol!r}")
        if self.wavepacket < 0:
            raise ParameterError("wavepacket index must be non-negative")

    def replace(self, **changes) -> ModeKey:
        fields = {"path": self.path, "pol": self.pol, "oam": self.oam, "wavepacket": self.wavepacket}
        fields.update(changes)
        return ModeKey(**fields)

    def to_list(self):
        return [self.path, self.pol, int(self.oam), int(self.wavepacket)]

    @classmethod
    def from_list(cls, item) -> ModeKey:
        path, pol, oam, wavepacket = item
        return cls(str(path), str(pol), int(oam), int(wavepacket))


@dataclass(frozen=True, order=True)
class FockBasisState:
    """Occupation-number basis state in canonical form (sorted, no zeros)."""

    occupations: tuple[tuple[ModeKey, int], ...] = ()

    @classmethod
    def from_counts(cls, counts: Mapping[ModeKey, int]) -> FockBasisState:
        items = []
        for mode, n in counts.items():
            if n < 0:
                raise DomainError("photon counts must be non-negative")
            if n:
                items.append((mode, int(n)))
        return cls(tuple(sorted(items)))

    @property
    def n_photons(self) -> int:
        return sum(n for _, n in self.occupations)

    def counts(self) -> dict[ModeKey, int]:
        return dict(self.occupations)

    def count(self, mode: ModeKey) -> int:
        for m, n in self.occupations:
            if m == mode:
                return n
        return 0

    def modes(self) -> tuple[ModeKey, ...]:
        return tuple(m for m, _ in self.occupations)


VACUUM_BASIS = FockBasisState()


@dataclass(frozen=True)
class PhotonicState:
    """Normalized superposition of Fock basis states.

    Use :meth:`from_terms` rather than the constructor; it canonicalizes,
    prunes and normalizes. A state with no terms and zero success
    probability represents an event that was post-selected away completely.
    """

    amplitudes: Mapping[FockBasisState, complex]
    success_probability: float = 1.0
    n_max: int = N_MAX

    @classmethod
    def from_terms(
        cls,
        terms: Mapping[FockBasisState, complex] | Iterable[tuple[FockBasisState, complex]],
        success_probability: float = 1.0,
        n_max: int = N_MAX,
        normalize: bool = True,
    ) -> PhotonicState:
        """Build a canonical state; the norm lost by normalization scales the success probability."""
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[FockBasisState, complex] = defaultdict(complex)
        for basis, amp in items:
            merged[basis] += complex(amp)
        kept = {b: a for b, a in merged.items() if abs(a) > PRUNE_TOL}
        numbers = {b.n_photons for b in kept}
        if len(numbers) > 1:
            raise DomainError(f"terms mix photon numbers {sorted(numbers)}")
        if numbers and max(numbers) > n_max:
            raise CapacityError(f"{max(numbers)} photons exceed n_max={n_max}")
        norm2 = sum(abs(a) ** 2 for a in kept.values())
        if norm2 <= PRUNE_TOL**2:
            return cls({}, 0.0, n_max)
        if normalize:
            scale = 1.0 / math.sqrt(norm2)
            kept = {b: a * scale for b, a in kept.items()}
            success_probability *= norm2
        ordered = dict(sorted(kept.items()))
        return cls(ordered, float(min(max(success_probability, 0.0), 1.0)), n_max)

    @property
    def is_null(self) -> bool:
        return not self.amplitudes

    @property
    def n_photons(self) -> int:
        if self.is_null:
            raise DomainError("null state has no photon number")
        return next(iter(self.amplitudes)).n_photons

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def paths(self) -> set[str]:
        return {m.path for b in self.amplitudes for m in b.modes()}

    def modes(self) -> list[ModeKey]:
        return sorted({m for b in self.amplitudes for m in b.modes()})

    def amplitude(self, basis: FockBasisState) -> complex:
        return self.amplitudes.get(basis, 0j)

    def with_success(self, success_probability: float) -> PhotonicState:
        return PhotonicState(self.amplitudes, success_probability, self.n_max)

    def to_json(self) -> dict:
        terms = []
        for basis, amp in self.amplitudes.items():
            terms.append({
                "modes": [[m.to_list(), n] for m, n in basis.occupations],
                "amp": [float(amp.real), float(amp.imag)],
            })
        return {"n_max": self.n_max, "success_probability": float(self.success_probability), "terms": terms}

    @classmethod
    def from_json(cls, data: Mapping) -> PhotonicState:
        n_max = int(data.get("n_max", N_MAX))
        terms = []
        for i, term in enumerate(data["terms"]):
            try:
                counts = {ModeKey.from_list(m): int(n) for m, n in term["modes"]}
                re, im = term["amp"]
            except (KeyError, TypeError, ValueError) as exc:
                raise DomainError(f"terms[{i}]: malformed term ({exc})") from exc
            terms.append((FockBasisState.from_counts(counts), complex(re, im)))
        return cls.from_terms(terms, float(data.get("success_probability", 1.0)), n_max)


def vacuum(n_max: int = N_MAX) -> PhotonicState:
    return PhotonicState({VACUUM_BASIS: 1 + 0j}, 1.0, n_max)


def fock_state(counts: Mapping[ModeKey, int], n_max: int = N_MAX) -> PhotonicState:
    """Single occupation-number basis state."""
    return PhotonicState.from_terms({FockBasisState.from_counts(counts): 1.0}, n_max=n_max)


def single_photon(amplitudes: Mapping[ModeKey, complex], n_max: int = N_MAX) -> PhotonicState:
    """One photon in the superposition ``sum_m amp_m a^dag_m |0>``."""
    return PhotonicState.from_terms(
        {FockBasisState.from_counts({m: 1}): a for m, a in amplitudes.items()}, n_max=n_max
    )


def apply_creation(state: PhotonicState, mode: ModeKey) -> PhotonicState:
    """Apply ``a^dag_mode`` and renormalize."""
    if state.is_null:
        return state
    if state.n_photons + 1 > state.n_max:
        raise CapacityError(f"creation would exceed n_max={state.n_max}")
    terms = []
    for basis, amp in state.amplitudes.items():
        counts = basis.counts()
        n = counts.get(mode, 0)
        counts[mode] = n + 1
        terms.append((FockBasisState.from_counts(counts), amp * math.sqrt(n + 1)))
    # re-normalization is part of the contract; keep the caller's success probability
    out = PhotonicState.from_terms(terms, 1.0, state.n_max)
    return out.with_success(state.success_probability)


def inner_product(a: PhotonicState, b: PhotonicState) -> complex:
    """Hermitian inner product ``<a|b>``."""
    return complex(sum(np.conj(amp) * b.amplitudes.get(basis, 0j) for basis, amp in a.amplitudes.items()))


def _merge_bases(x: FockBasisState, y: FockBasisState) -> tuple[FockBasisState, float]:
    """Product of two normalized Fock kets as creation polynomials."""
    counts = Counter(x.counts())
    weight = 1.0
    for mode, n in y.occupations:
        m = counts[mode]
        weight *= math.sqrt(math.comb(m + n, n))
        counts[mode] = m + n
    return FockBasisState.from_counts(counts), weight


def tensor(a: PhotonicState, b: PhotonicState) -> PhotonicState:
    """Combine two states; overlapping modes follow bosonic ladder algebra."""
    if a.is_null or b.is_null:
        return PhotonicState({}, 0.0, max(a.n_max, b.n_max))
    n_max = max(a.n_max, b.n_max)
    if a.n_photons + b.n_photons > n_max:
        raise CapacityError(f"{a.n_photons + b.n_photons} photons exceed n_max={n_max}")
    terms = []
    for xa, amp_a in a.amplitudes.items():
        for xb, amp_b in b.amplitudes.items():
            basis, w = _merge_bases(xa, xb)
            terms.append((basis, amp_a * amp_b * w))
    out = PhotonicState.from_terms(terms, 1.0, n_max)
    return out.with_success(a.success_probability * b.success_probability)


Images = Callable[[ModeKey], Sequence[tuple[ModeKey, complex]]]


def substitute(state: PhotonicState, images: Images) -> dict[FockBasisState, complex]:
    """Replace every creation operator by its image and expand.

    ``images(mode)`` returns the linear combination ``[(out_mode, coeff), ...]``
    that ``a^dag_mode`` is mapped to. An empty image means the photon is lost.
    Returns unnormalized amplitudes; terms that lost a photon are absent.
    """
    out: dict[FockBasisState, complex] = defaultdict(complex)
    cache: dict[ModeKey, Sequence[tuple[ModeKey, complex]]] = {}
    for basis, amp in state.amplitudes.items():
        factors = []
        denom = 1
        for mode, n in basis.occupations:
            if mode not in cache:
                cache[mode] = [(m, complex(c)) for m, c in images(mode) if c != 0]
            factors.extend([cache[mode]] * n)
            denom *= math.factorial(n)
        poly: dict[tuple[ModeKey, ...], complex] = {(): amp / math.sqrt(denom)}
        for image in factors:
            nxt: dict[tuple[ModeKey, ...], complex] = defaultdict(complex)
            for mono, c in poly.items():
                for mode, u in image:
                    nxt[tuple(sorted(mono + (mode,)))] += c * u
            poly = nxt
        for mono, c in poly.items():
            counts = Counter(mono)
            weight = math.sqrt(math.prod(math.factorial(k) for k in counts.values()))
            out[FockBasisState.from_counts(counts)] += c * weight
    return dict(out)


def transform(state: PhotonicState, images: Images) -> PhotonicState:
    """Apply a linear mode map and fold the surviving norm into success_probability."""
    if state.is_null:
        return state
    terms = substitute(state, images)
    return PhotonicState.from_terms(terms, state.success_probability, state.n_max)


def wavepacket_decompose(t_d: float, tau_c: float) -> tuple[float, tuple[float, float]]:
    """Overlap of a wavepacket delayed by ``t_d`` with the undelayed one.

    Gaussian model: ``gamma = exp(-t_d**2 / (2 tau_c**2))``. The delayed packet
    decomposes as ``gamma e0 + sqrt(1 - gamma**2) e1`` on the orthonormal pair
    (undelayed packet, orthogonal complement).
    """
    if not tau_c > 0:
        raise ParameterError(f"tau_c must be positive, got {tau_c}")
    if math.isinf(t_d):
        gamma = 0.0
    else:
        gamma = math.exp(-(t_d**2) / (2.0 * tau_c**2))
    return gamma, (gamma, math.sqrt(max(0.0, 1.0 - gamma**2)))
