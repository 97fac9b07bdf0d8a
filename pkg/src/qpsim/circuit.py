"""Circuit specifications and their application to photonic states.

A circuit file is a JSON array of steps::

    [{"element": "qplate", "params": {"eta": 1.0}, "paths": ["k"]}, ...]

Steps are applied strictly in order. The first entry of ``paths`` is the
element's input path and must exist when the step is reached: either it
carries photons in the input state or an earlier element created it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import elements as el
from .constants import TAU_C_PS
from .errors import ConfigurationError, PathError
from .fock import PhotonicState


@dataclass(frozen=True)
class Step:
    element: str
    params: Mapping[str, Any] = field(default_factory=dict)
    paths: tuple[str, ...] = ()

    def to_json(self):
        return {"element": self.element, "params": dict(self.params), "paths": list(self.paths)}


def _qplate(params, paths):
    return el.qplate(el.QPlateParams(**params), *paths)


def _hologram(params, paths):
    return el.hologram(el.HologramParams(**params), *paths)


def _delay(params, paths):
    p = dict(params)
    t_d = float(p.pop("t_d"))
    pol = p.pop("pol", "V")
    tau_c = float(p.pop("tau_c", TAU_C_PS))
    return el.delay(t_d, pol, paths[0], tau_c, **p)


def _jones(params, paths):
    m = [[complex(re, im) for re, im in row] for row in params["matrix"]]
    return el.jones(m, paths[0])


#: name -> (builder(params, paths), number of paths)
REGISTRY: dict[str, tuple[Callable[[Mapping, Sequence[str]], el.LinearElement], int]] = {
    "qplate": (_qplate, 1),
    "quarter_wave": (lambda p, ps: el.quarter_wave(float(p["theta_deg"]), ps[0]), 1),
    "half_wave": (lambda p, ps: el.half_wave(float(p["theta_deg"]), ps[0]), 1),
    "jones": (_jones, 1),
    "polarizer": (lambda p, ps: el.polarizer(p["direction"], ps[0]), 1),
    "pbs": (lambda p, ps: el.pbs(*ps), 3),
    "beamsplitter_5050": (lambda p, ps: el.beamsplitter_5050(*ps), 3),
    "hologram": (_hologram, 4),
    "smf_filter": (lambda p, ps: el.smf_filter(ps[0]), 1),
    "block": (lambda p, ps: el.block(ps[0]), 1),
    "oam_rotation": (lambda p, ps: el.oam_rotation(float(p["angle"]), ps[0]), 1),
    "delay": (_delay, 1),
}


@dataclass(frozen=True)
class CircuitSpec:
    steps: tuple[Step, ...] = ()

    def __add__(self, other: CircuitSpec) -> CircuitSpec:
        return CircuitSpec(self.steps + other.steps)

    def build(self) -> list[el.LinearElement]:
        built = []
        for i, step in enumerate(self.steps):
            if step.element not in REGISTRY:
                raise ConfigurationError(
                    f"[{i}].element: unknown element {step.element!r}; known: {', '.join(sorted(REGISTRY))}"
                )
            builder, n_paths = REGISTRY[step.element]
            if len(step.paths) != n_paths:
                raise ConfigurationError(f"[{i}].paths: {step.element} expects {n_paths} paths, got {len(step.paths)}")
            try:
                built.append(builder(dict(step.params), list(step.paths)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigurationError(f"[{i}].params: {exc}") from exc
        return built

    def validate(self, input_paths: Iterable[str]) -> None:
        known = set(input_paths)
        for i, step in enumerate(self.steps):
            if step.paths and step.paths[0] not in known:
                raise PathError(f"[{i}].paths[0]: unknown path {step.paths[0]!r}")
            known.update(step.paths)

    def to_json(self) -> list[dict]:
        return [s.to_json() for s in self.steps]

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def from_json(cls, data) -> CircuitSpec:
        if not isinstance(data, list):
            raise ConfigurationError("circuit must be a JSON array of steps")
        steps = []
        for i, item in enumerate(data):
            if not isinstance(item, dict) or "element" not in item:
                raise ConfigurationError(f"[{i}]: step must be an object with an 'element' field")
            extra = set(item) - {"element", "params", "paths"}
            if extra:
                raise ConfigurationError(f"[{i}]: unexpected fields {sorted(extra)}")
            params = item.get("params", {})
            paths = item.get("paths", [])
            if not isinstance(params, dict):
                raise ConfigurationError(f"[{i}].params: must be an object")
            if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
                raise ConfigurationError(f"[{i}].paths: must be an array of strings")
            if item["element"] not in REGISTRY:
                raise ConfigurationError(
                    f"[{i}].element: unknown element {item['element']!r}; known: {', '.join(sorted(REGISTRY))}"
                )
            steps.append(Step(item["element"], params, tuple(paths)))
        return cls(tuple(steps))

    @classmethod
    def load(cls, path) -> CircuitSpec:
        return cls.from_json(json.loads(Path(path).read_text()))


def step(element: str, *paths: str, **params) -> Step:
    return Step(element, params, tuple(paths))


def circuit(*steps: Step) -> CircuitSpec:
    return CircuitSpec(tuple(steps))


def apply(spec: CircuitSpec | Sequence[el.LinearElement], state: PhotonicState) -> PhotonicState:
    """Run ``state`` through every element of ``spec`` in order."""
    if isinstance(spec, CircuitSpec):
        if not state.is_null:
            spec.validate(state.paths())
        elements = spec.build()
    else:
        elements = list(spec)
    for element in elements:
        state = element(state)
    return state


def apply_ensemble(spec, ensemble: Sequence[tuple[float, PhotonicState]]) -> list[tuple[float, PhotonicState]]:
    """Apply ``spec`` to every member of a weighted ensemble."""
    elements = spec.build() if isinstance(spec, CircuitSpec) else list(spec)
    if isinstance(spec, CircuitSpec):
        for _, s in ensemble:
            if not s.is_null:
                spec.validate(s.paths())
    return [(w, apply(elements, s)) for w, s in ensemble]

