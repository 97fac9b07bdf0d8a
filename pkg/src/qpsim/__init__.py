"""Fock-space simulator for q-plate spin-orbit photonics experiments."""

from .circuit import CircuitSpec, apply, circuit, step
from .fock import ModeKey, PhotonicState, fock_state, single_photon, vacuum
from .scenarios import NoiseParams, ScenarioResult, calibrated_preset

__version__ = "0.1.0"

__all__ = [
    "CircuitSpec", "apply", "circuit", "step",
    "ModeKey", "PhotonicState", "fock_state", "single_photon", "vacuum",
    "NoiseParams", "ScenarioResult", "calibrated_preset",
]
