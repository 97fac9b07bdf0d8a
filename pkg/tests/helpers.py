"""Comparisons between the simulator and the reference oracles."""

from __future__ import annotations

import numpy as np
from oracles import occupations, permanent_amplitudes, random_subunitary

from qpsim.elements import LinearElement
from qpsim.fock import FockBasisState, ModeKey, PhotonicState, substitute

MODE_POOL = [ModeKey(p, pol, l) for p in ("a", "b", "c") for pol in ("H", "V") for l in (-2, 0, 2)]


def random_oracle_case(rng):
    """Random sub-unitary on <= 6 modes and a superposition of <= 3-photon inputs."""
    n_in = int(rng.integers(1, 7))
    n_out = int(rng.integers(1, 7))
    idx = rng.choice(len(MODE_POOL), size=n_in + n_out, replace=False)
    in_modes = [MODE_POOL[i] for i in idx[:n_in]]
    out_modes = [ModeKey("o" + m.path, m.pol, m.oam) for m in (MODE_POOL[i] for i in idx[n_in:])]
    u = random_subunitary(rng, n_out, n_in)
    n = int(rng.integers(1, 4))
    basis = list(occupations(n, n_in))
    chosen = rng.choice(len(basis), size=min(len(basis), int(rng.integers(1, 4))), replace=False)
    inputs = {basis[i]: complex(rng.normal(), rng.normal()) for i in chosen}
    return in_modes, out_modes, u, inputs


def oracle_deviation(in_modes, out_modes, u, inputs) -> float:
    """max |amp_sim - amp_oracle| over all output occupations (unnormalized)."""
    element = LinearElement.from_matrix("random", in_modes, out_modes, u)
    norm = np.sqrt(sum(abs(a) ** 2 for a in inputs.values()))
    terms = {
        FockBasisState.from_counts({m: c for m, c in zip(in_modes, occ) if c}): a / norm
        for occ, a in inputs.items()
    }
    state = PhotonicState.from_terms(terms)
    sim = substitute(state, element.images)
    expected = permanent_amplitudes({occ: a / norm for occ, a in inputs.items()}, u)
    worst = 0.0
    seen = set()
    for occ, amp in expected.items():
        key = FockBasisState.from_counts({m: c for m, c in zip(out_modes, occ) if c})
        seen.add(key)
        worst = max(worst, abs(sim.get(key, 0) - amp))
    for key, amp in sim.items():
        if key not in seen:
            worst = max(worst, abs(amp))
    return worst


def max_oracle_deviation(n_cases: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    return max(oracle_deviation(*random_oracle_case(rng)) for _ in range(n_cases))
