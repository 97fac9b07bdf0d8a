import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import random_unitary

from qpsim.errors import CapacityError, DomainError, ParameterError
from qpsim.fock import (
    FockBasisState,
    ModeKey,
    PhotonicState,
    apply_creation,
    fock_state,
    inner_product,
    single_photon,
    substitute,
    tensor,
    transform,
    vacuum,
    wavepacket_decompose,
)

H0 = ModeKey("k", "H")
V0 = ModeKey("k", "V")


def test_modekey_validation_and_roundtrip():
    m = ModeKey("a", "V", -2, 1)
    assert ModeKey.from_list(m.to_list()) == m
    with pytest.raises(ParameterError):
        ModeKey("a", "L")
    with pytest.raises(ParameterError):
        ModeKey("a", "H", 0, -1)


def test_basis_state_is_canonical():
    a = FockBasisState.from_counts({V0: 1, H0: 2})
    b = FockBasisState.from_counts({H0: 2, V0: 1, ModeKey("z", "H"): 0})
    assert a == b and hash(a) == hash(b)
    assert a.n_photons == 3
    assert a.count(H0) == 2 and a.count(ModeKey("z", "H")) == 0


def test_from_terms_merges_prunes_and_normalizes():
    b = FockBasisState.from_counts({H0: 1})
    s = PhotonicState.from_terms([(b, 0.3), (b, 0.3), (FockBasisState.from_counts({V0: 1}), 1e-16)])
    assert list(s.amplitudes) == [b]
    assert s.amplitude(b) == pytest.approx(1.0)
    assert s.success_probability == pytest.approx(0.36)


def test_mixed_photon_numbers_rejected():
    with pytest.raises(DomainError):
        PhotonicState.from_terms({FockBasisState.from_counts({H0: 1}): 1, FockBasisState.from_counts({H0: 2}): 1})


def test_capacity_enforced():
    with pytest.raises(CapacityError):
        fock_state({H0: 3}, n_max=2)
    s = fock_state({H0: 2}, n_max=2)
    with pytest.raises(CapacityError):
        apply_creation(s, V0)


def test_creation_operator_weights():
    s = apply_creation(apply_creation(vacuum(), H0), H0)
    assert s == fock_state({H0: 2})
    assert vacuum().n_photons == 0


def test_tensor_applies_bosonic_weights():
    s = tensor(single_photon({H0: 1}), single_photon({H0: 1}))
    assert s.amplitude(FockBasisState.from_counts({H0: 2})) == pytest.approx(1.0)
    t = tensor(single_photon({H0: 1, V0: 1}), single_photon({H0: 1}))
    # (|2_H> sqrt2 + |1_H 1_V>) / sqrt3
    assert abs(t.amplitude(FockBasisState.from_counts({H0: 2}))) ** 2 == pytest.approx(2 / 3)


def test_substitution_balanced_beamsplitter_gives_hom():
    a, b = ModeKey("a", "H"), ModeKey("b", "H")
    images = {a: [(a, 1 / math.sqrt(2)), (b, 1 / math.sqrt(2))], b: [(a, 1 / math.sqrt(2)), (b, -1 / math.sqrt(2))]}
    out = transform(fock_state({a: 1, b: 1}), lambda m: images[m])
    assert out.amplitude(FockBasisState.from_counts({a: 1, b: 1})) == 0
    assert abs(out.amplitude(FockBasisState.from_counts({a: 2}))) ** 2 == pytest.approx(0.5)


def test_loss_accumulates_in_success_probability():
    out = transform(single_photon({H0: 1}), lambda m: [(m, math.sqrt(0.3))])
    assert out.success_probability == pytest.approx(0.3)
    lost = transform(single_photon({H0: 1}), lambda m: [])
    assert lost.is_null and lost.success_probability == 0.0
    assert substitute(single_photon({H0: 1}), lambda m: []) == {}


def test_json_roundtrip():
    s = tensor(single_photon({H0: 1, V0: 1j}), single_photon({ModeKey("b", "V", 2, 1): 1}))
    back = PhotonicState.from_json(json.loads(json.dumps(s.to_json())))
    assert back.amplitudes.keys() == s.amplitudes.keys()
    for k in s.amplitudes:
        assert back.amplitude(k) == pytest.approx(s.amplitude(k), abs=1e-15)
    with pytest.raises(DomainError):
        PhotonicState.from_json({"terms": [{"modes": [["k", "H"]], "amp": [1, 0]}]})


def test_wavepacket_decompose():
    g, (c0, c1) = wavepacket_decompose(0.0, 0.35)
    assert g == 1.0 and c1 == 0.0
    g, (c0, c1) = wavepacket_decompose(0.35, 0.35)
    assert g == pytest.approx(math.exp(-0.5))
    assert c0**2 + c1**2 == pytest.approx(1.0)
    assert wavepacket_decompose(math.inf, 0.35)[0] == 0.0
    with pytest.raises(ParameterError):
        wavepacket_decompose(0.0, 0.0)


modes = st.builds(
    ModeKey,
    st.sampled_from(["a", "b", "c"]),
    st.sampled_from(["H", "V"]),
    st.integers(-4, 4),
    st.integers(0, 1),
)
amps = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.lists(modes, min_size=2, max_size=2), amps), min_size=1, max_size=6))
def test_canonical_form_and_norm_property(terms):
    items = [(FockBasisState.from_counts(_count(ms)), a) for ms, a in terms]
    s = PhotonicState.from_terms(items)
    shuffled = PhotonicState.from_terms(list(reversed(items)))
    if s.is_null:
        assert shuffled.is_null
        return
    assert s.norm() == pytest.approx(1.0, abs=1e-12)
    assert list(s.amplitudes) == sorted(s.amplitudes)
    assert s.amplitudes.keys() == shuffled.amplitudes.keys()
    assert abs(inner_product(s, shuffled)) == pytest.approx(1.0, abs=1e-9)


def _count(ms):
    out = {}
    for m in ms:
        out[m] = out.get(m, 0) + 1
    return out


@settings(max_examples=50, deadline=None)
@given(st.lists(modes, min_size=1, max_size=3, unique=True), st.integers(0, 2**31))
def test_unitary_maps_preserve_norm(in_modes, seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, len(in_modes))
    table = {m: [(in_modes[k], u[k, j]) for k in range(len(in_modes))] for j, m in enumerate(in_modes)}
    state = fock_state({in_modes[0]: 2})
    out = transform(state, lambda m: table.get(m, [(m, 1)]))
    assert out.success_probability == pytest.approx(1.0, abs=1e-12)
