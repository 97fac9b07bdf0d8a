"""Optical elements as linear maps on creation operators.

An element maps ``a^dag_in -> sum_k U[k, in] a^dag_k``. Elements are defined
by a rule over :class:`~qpsim.fock.ModeKey` so that they act on every OAM
value and wavepacket of their path; :meth:`LinearElement.matrix` gives the
explicit matrix on any finite set of input modes.

Conventions
-----------
* Circular polarization: ``L = (H + iV)/sqrt(2)``, ``R = (H - iV)/sqrt(2)``.
* Wave plates: ``J(theta) = Rot(theta) diag(1, e^{-i delta}) Rot(-theta)`` with
  the fast axis at ``theta`` from H and ``delta = pi/2`` (quarter) or ``pi``
  (half). With this choice ``quarter_wave(45)`` takes H to L up to phase.
* PBS: H is transmitted, V reflected, no reflection phase.
* 50/50 beam splitter: ``a^dag_in -> (a^dag_a + a^dag_b)/sqrt(2)``.
* Loss: amplitude that an element does not route to an output mode is lost.
  Lost photons are post-selected away, so the state stays at fixed photon
  number and the discarded probability accumulates in ``success_probability``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constants import HOLOGRAM_EFFICIENCY
from .errors import ParameterError
from .fock import ModeKey, PhotonicState, transform, wavepacket_decompose

Image = Sequence[tuple[ModeKey, complex]]
Rule = Callable[[ModeKey], "Image | None"]

SQRT1_2 = 1.0 / math.sqrt(2.0)

#: Polarization unit vectors in the stored (H, V) basis.
POL_VECTORS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([1, 1], dtype=complex) * SQRT1_2,
    "A": np.array([1, -1], dtype=complex) * SQRT1_2,
    "L": np.array([1, 1j], dtype=complex) * SQRT1_2,
    "R": np.array([1, -1j], dtype=complex) * SQRT1_2,
}

#: Columns are L and R expressed in H/V.
CIRCULAR_BASIS = np.column_stack([POL_VECTORS["L"], POL_VECTORS["R"]])

_POL_INDEX = {"H": 0, "V": 1}
_POL_NAME = ("H", "V")


@dataclass(frozen=True)
class LinearElement:
    """A passive, possibly lossy, linear optical element.

    Modes for which ``rule`` returns ``None`` pass through unchanged.
    """

    name: str
    rule: Rule = field(repr=False, compare=False)
    paths: tuple[str, ...] = ()
    params: dict = field(default_factory=dict, compare=False)

    def images(self, mode: ModeKey) -> Image:
        image = self.rule(mode)
        if image is None:
            return ((mode, 1.0),)
        return image

    def acts_on(self, mode: ModeKey) -> bool:
        return self.rule(mode) is not None

    def matrix(self, in_modes: Sequence[ModeKey]) -> tuple[list[ModeKey], np.ndarray]:
        """Explicit ``(out_modes, U)`` restricted to ``in_modes``."""
        images = [self.images(m) for m in in_modes]
        out_modes = sorted({m for image in images for m, _ in image})
        index = {m: i for i, m in enumerate(out_modes)}
        u = np.zeros((len(out_modes), len(in_modes)), dtype=complex)
        for j, image in enumerate(images):
            for m, c in image:
                u[index[m], j] += c
        return out_modes, u

    def representative_modes(self, oam_range=range(-4, 5), wavepackets=(0, 1)) -> list[ModeKey]:
        return [
            ModeKey(p, pol, l, w)
            for p in self.paths[:1]
            for pol in ("H", "V")
            for l in oam_range
            for w in wavepackets
        ]

    def spectral_norm(self, in_modes: Sequence[ModeKey] | None = None) -> float:
        _, u = self.matrix(in_modes or self.representative_modes())
        return float(np.linalg.norm(u, 2)) if u.size else 0.0

    def is_lossless(self, in_modes: Sequence[ModeKey] | None = None, tol: float = 1e-10) -> bool:
        _, u = self.matrix(in_modes or self.representative_modes())
        return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=tol))

    @property
    def lossless(self) -> bool:
        return self.is_lossless()

    def __call__(self, state: PhotonicState) -> PhotonicState:
        return transform(state, self.images)

    @classmethod
    def from_matrix(
        cls, name: str, in_modes: Sequence[ModeKey], out_modes: Sequence[ModeKey], u: np.ndarray
    ) -> LinearElement:
        """Element given by an explicit matrix; other modes pass through."""
        u = np.asarray(u, dtype=complex)
        if u.shape != (len(out_modes), len(in_modes)):
            raise ParameterError(f"matrix shape {u.shape} does not match modes")
        if u.size and np.linalg.norm(u, 2) > 1 + 1e-12:
            raise ParameterError("element matrix is not sub-unitary")
        table = {
            m: tuple((out_modes[k], u[k, j]) for k in range(len(out_modes)) if u[k, j] != 0)
            for j, m in enumerate(in_modes)
        }
        paths = tuple(dict.fromkeys(m.path for m in in_modes))
        return cls(name, table.get, paths, {})


def _polarization_rule(path: str, jones: np.ndarray) -> Rule:
    """Rule applying a 2x2 Jones matrix to the polarization of ``path``."""

    def rule(mode: ModeKey):
        if mode.path != path:
            return None
        col = jones[:, _POL_INDEX[mode.pol]]
        return tuple((mode.replace(pol=_POL_NAME[k]), col[k]) for k in range(2) if col[k] != 0)

    return rule


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def waveplate_matrix(theta_deg: float, retardance: float) -> np.ndarray:
    """Jones matrix of a retarder with fast axis at ``theta_deg``."""
    theta = math.radians(theta_deg)
    core = np.diag([1.0, np.exp(-1j * retardance)])
    return _rotation(theta) @ core @ _rotation(-theta)


def jones(matrix, path: str, name: str = "jones") -> LinearElement:
    """Arbitrary 2x2 Jones matrix on the polarization of ``path``."""
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2):
        raise ParameterError("Jones matrix must be 2x2")
    if np.linalg.norm(m, 2) > 1 + 1e-12:
        raise ParameterError("Jones matrix is not sub-unitary")
    params = {"matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m]}
    return LinearElement(name, _polarization_rule(path, m), (path,), params)


def quarter_wave(theta_deg: float, path: str) -> LinearElement:
    el = jones(waveplate_matrix(theta_deg, math.pi / 2), path, "quarter_wave")
    return LinearElement("quarter_wave", el.rule, (path,), {"theta_deg": theta_deg})


def half_wave(theta_deg: float, path: str) -> LinearElement:
    el = jones(waveplate_matrix(theta_deg, math.pi), path, "half_wave")
    return LinearElement("half_wave", el.rule, (path,), {"theta_deg": theta_deg})


def polarizer(direction: str, path: str) -> LinearElement:
    """Ideal polarizer transmitting ``direction`` in {H, V, D, A, L, R}."""
    try:
        v = POL_VECTORS[direction]
    except KeyError:
        raise ParameterError(f"unknown polarizer direction {direction!r}") from None
    el = jones(np.outer(v, v.conj()), path, "polarizer")
    return LinearElement("polarizer", el.rule, (path,), {"direction": direction})


@dataclass(frozen=True)
class QPlateParams:
    """q-plate with charge 1: conversion efficiency ``eta``, transmittance ``transmittance``."""

    q_charge: int = 1
    delta: float = math.pi
    eta: float = 1.0
    transmittance: float = 1.0

    def __post_init__(self):
        if self.q_charge != 1:
            raise ParameterError("only q = 1 plates are supported")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.transmittance <= 1.0:
            raise ParameterError(f"transmittance must lie in [0, 1], got {self.transmittance}")

    def to_json(self):
        return {"q_charge": self.q_charge, "delta": self.delta, "eta": self.eta, "transmittance": self.transmittance}


def qplate_circular(params: QPlateParams, l: int) -> dict[tuple[str, int], list[tuple[tuple[str, int], float]]]:
    """q-plate action on circular creation operators at OAM ``l``.

    ``L,l -> sqrt(T) (sqrt(eta) R,l+2 + sqrt(1-eta) L,l)`` and
    ``R,l -> sqrt(T) (sqrt(eta) L,l-2 + sqrt(1-eta) R,l)``.
    """
    t = math.sqrt(params.transmittance)
    conv = t * math.sqrt(params.eta)
    stay = t * math.sqrt(1.0 - params.eta)
    return {
        ("L", l): [(("R", l + 2), conv), (("L", l), stay)],
        ("R", l): [(("L", l - 2), conv), (("R", l), stay)],
    }


def qplate(params: QPlateParams, path: str) -> LinearElement:
    """q-plate acting on every OAM value of ``path``; built in the circular basis."""
    to_circ = np.linalg.inv(CIRCULAR_BASIS)  # a^dag_p = sum_c to_circ[c, p] a^dag_c
    circ_names = ("L", "R")

    def rule(mode: ModeKey):
        if mode.path != path:
            return None
        p = _POL_INDEX[mode.pol]
        table = qplate_circular(params, mode.oam)
        acc: dict[ModeKey, complex] = {}
        for ci, cname in enumerate(circ_names):
            a = to_circ[ci, p]
            for (cout, lout), c in table[(cname, mode.oam)]:
                if c == 0:
                    continue
                col = CIRCULAR_BASIS[:, circ_names.index(cout)]
                for k in range(2):
                    out = mode.replace(pol=_POL_NAME[k], oam=lout)
                    acc[out] = acc.get(out, 0j) + a * c * col[k]
        return tuple((m, c) for m, c in sorted(acc.items()) if abs(c) > 1e-15)

    return LinearElement("qplate", rule, (path,), params.to_json())


def pbs(path_in: str, path_t: str, path_r: str) -> LinearElement:
    if len({path_in, path_t, path_r}) != 3:
        raise ParameterError("PBS paths must be distinct")

    def rule(mode: ModeKey):
        if mode.path != path_in:
            return None
        return ((mode.replace(path=path_t if mode.pol == "H" else path_r), 1.0),)

    return LinearElement("pbs", rule, (path_in, path_t, path_r), {})


def beamsplitter_5050(path_in: str, path_a: str, path_b: str) -> LinearElement:
    if len({path_in, path_a, path_b}) != 3:
        raise ParameterError("beam splitter paths must be distinct")

    def rule(mode: ModeKey):
        if mode.path != path_in:
            return None
        return ((mode.replace(path=path_a), SQRT1_2), (mode.replace(path=path_b), SQRT1_2))

    return LinearElement("beamsplitter_5050", rule, (path_in, path_a, path_b), {})


def smf_filter(path: str) -> LinearElement:
    """Single-mode fibre: only l = 0 survives."""

    def rule(mode: ModeKey):
        if mode.path != path:
            return None
        return ((mode, 1.0),) if mode.oam == 0 else ()

    return LinearElement("smf_filter", rule, (path,), {})


def block(path: str) -> LinearElement:
    """Beam dump: every photon on ``path`` is discarded."""

    def rule(mode: ModeKey):
        return () if mode.path == path else None

    return LinearElement("block", rule, (path,), {})


def oam_rotation(angle: float, path: str) -> LinearElement:
    """Image rotation by ``angle`` (radians): ``a^dag_l -> e^{i l angle} a^dag_l``."""

    def rule(mode: ModeKey):
        if mode.path != path:
            return None
        return ((mode, complex(np.exp(1j * mode.oam * angle))),)

    return LinearElement("oam_rotation", rule, (path,), {"angle": angle})


def delay(t_d: float, pol: str, path: str, tau_c: float, distinguishability: float = 0.0) -> LinearElement:
    """Delay the ``pol`` photons on ``path`` by ``t_d``.

    Rotates the wavepacket pair (0, 1) of the selected polarization so that
    the overlap with the undelayed packet is ``gamma * sqrt(1 - distinguishability)``.
    """
    if pol not in _POL_INDEX:
        raise ParameterError("delay polarization must be H or V")
    if not 0.0 <= distinguishability <= 1.0:
        raise ParameterError("distinguishability must lie in [0, 1]")
    gamma, _ = wavepacket_decompose(t_d, tau_c)
    g = gamma * math.sqrt(1.0 - distinguishability)
    s = math.sqrt(max(0.0, 1.0 - g * g))

    def rule(mode: ModeKey):
        if mode.path != path or mode.pol != pol or mode.wavepacket > 1:
            return None
        w0, w1 = mode.replace(wavepacket=0), mode.replace(wavepacket=1)
        if mode.wavepacket == 0:
            return ((w0, g), (w1, s))
        return ((w0, -s), (w1, g))

    params = {"t_d": t_d, "pol": pol, "tau_c": tau_c, "distinguishability": distinguishability}
    return LinearElement("delay", rule, (path,), params)


@dataclass(frozen=True)
class HologramParams:
    delta_l_per_order: int = 2
    first_order_efficiency: float = HOLOGRAM_EFFICIENCY
    variant: str = "fork_pm2"

    def __post_init__(self):
        if not 0.0 <= self.first_order_efficiency <= 0.5:
            raise ParameterError("first-order efficiency must lie in [0, 0.5]")
        if self.variant not in HOLOGRAM_VARIANTS:
            raise ParameterError(f"unknown hologram variant {self.variant!r}")

    def to_json(self):
        return {
            "delta_l_per_order": self.delta_l_per_order,
            "first_order_efficiency": self.first_order_efficiency,
            "variant": self.variant,
        }


#: OAM qubit states analysed by the superposition holograms, as
#: (amplitude on +2, amplitude on -2).
OAM_SUPERPOSITIONS = {
    "d_plus": np.array([1, 1], dtype=complex) * SQRT1_2,
    "d_minus": np.array([1, -1], dtype=complex) * SQRT1_2,
    "d_L": np.array([1, 1j], dtype=complex) * SQRT1_2,
    "d_R": np.array([1, -1j], dtype=complex) * SQRT1_2,
}
HOLOGRAM_VARIANTS = ("fork_pm2",) + tuple(OAM_SUPERPOSITIONS)


def hologram(params: HologramParams, path_in: str, path_plus: str, path_zero: str, path_minus: str) -> LinearElement:
    """Diffractive OAM analyser.

    ``fork_pm2`` sends ``l`` to ``l - 2`` on ``path_plus`` and ``l + 2`` on
    ``path_minus`` with amplitude ``sqrt(eps)`` each, and keeps
    ``sqrt(1 - 2 eps)`` in the zero order. The superposition variants project
    the ``l = +-2`` subspace onto their state, shifting it to ``l = 0`` on
    ``path_plus`` with amplitude ``sqrt(eps)``; the rest of the first order is lost.
    """
    if len({path_in, path_plus, path_zero, path_minus}) != 4:
        raise ParameterError("hologram paths must be distinct")
    eps = params.first_order_efficiency
    dl = params.delta_l_per_order
    first = math.sqrt(eps)
    zero = math.sqrt(max(0.0, 1.0 - 2.0 * eps))
    target = OAM_SUPERPOSITIONS.get(params.variant)

    def rule(mode: ModeKey):
        if mode.path != path_in:
            return None
        out = []
        if params.variant == "fork_pm2":
            out.append((mode.replace(path=path_plus, oam=mode.oam - dl), first))
            out.append((mode.replace(path=path_zero), zero))
            out.append((mode.replace(path=path_minus, oam=mode.oam + dl), first))
        else:
            out.append((mode.replace(path=path_zero), zero))
            if mode.oam in (dl, -dl):
                coeff = target[0 if mode.oam == dl else 1].conjugate()
                out.append((mode.replace(path=path_plus, oam=0), first * coeff))
        return tuple((m, c) for m, c in out if c != 0)

    return LinearElement("hologram", rule, (path_in, path_plus, path_zero, path_minus), params.to_json())
