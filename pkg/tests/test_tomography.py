import math

import numpy as np
import pytest
from oracles import random_density_matrix, random_unitary

from qpsim import metrics
from qpsim import tomography as tomo
from qpsim.errors import DataError
from qpsim.measurement import sample_counts


def _sampled_table(settings, rho, shots, seed):
    table = {}
    seeds = np.random.SeedSequence(seed).generate_state(len(settings.projectors))
    for (s, outcomes), sd in zip(settings.projectors.items(), seeds):
        probs = [(o, float(np.real(np.trace(p @ rho)))) for o, p in outcomes.items()]
        for r in sample_counts(probs, shots, int(sd), setting=s):
            table[(s, r.pattern)] = r.counts
    return table


def test_two_qubit_settings_are_complete():
    st = tomo.TomoSettings.two_qubit()
    assert len(st.projectors) == 9 and len(st.keys()) == 36
    for outcomes in st.projectors.values():
        assert np.allclose(sum(outcomes.values()), np.eye(4))
    with pytest.raises(DataError):
        tomo.TomoSettings({"Z": {"0": np.diag([1.0, 0]), "1": np.diag([0, 1.0])}})


def test_linear_inversion_exact():
    rng = np.random.default_rng(0)
    st = tomo.TomoSettings.two_qubit()
    rho = random_density_matrix(rng)
    assert np.allclose(tomo.linear_inversion(st.probabilities(rho), st), rho, atol=1e-10)


def test_psd_projection():
    m = np.diag([0.7, 0.5, -0.2, 0.0])
    p = tomo.project_psd(m)
    assert np.trace(p).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(p).min() >= -1e-12
    rho = random_density_matrix(np.random.default_rng(1))
    assert np.allclose(tomo.project_psd(rho), rho)


def test_cholesky_parameterization_roundtrip():
    rng = np.random.default_rng(2)
    for rank in (1, 2, 4):
        rho = random_density_matrix(rng, rank=rank)
        assert np.allclose(tomo.rho_from_params(tomo.cholesky_params(rho), 4), rho, atol=1e-10)


@pytest.mark.parametrize("likelihood", ["multinomial", "poisson"])
def test_analytic_gradient_matches_finite_differences(likelihood):
    rng = np.random.default_rng(3)
    st = tomo.TomoSettings.two_qubit(likelihood=likelihood)
    table = _sampled_table(st, random_density_matrix(rng), 1000, 4)
    f, _, _ = tomo._objective(st, table)
    x = rng.normal(size=16)
    _, g = f(x)
    h = 1e-6
    fd = np.array([(f(x + h * e)[0] - f(x - h * e)[0]) / (2 * h) for e in np.eye(16)])
    assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_mle_recovers_exact_states():
    rng = np.random.default_rng(4)
    st = tomo.TomoSettings.two_qubit()
    for rank in (1, 2, 4):
        rho = random_density_matrix(rng, rank=rank)
        res = tomo.mle_state_tomo(st.probabilities(rho), st)
        assert res.converged
        assert metrics.fidelity(res.rho, rho) > 0.9999


def test_mle_from_counts_is_physical_and_deterministic():
    rng = np.random.default_rng(5)
    st = tomo.TomoSettings.two_qubit(seed=9)
    rho = random_density_matrix(rng, rank=1)
    table = _sampled_table(st, rho, 10_000, 6)
    a = tomo.mle_state_tomo(table, st)
    b = tomo.mle_state_tomo(table, st)
    assert np.array_equal(a.rho, b.rho)
    metrics.check_density_matrix(a.rho)
    assert metrics.fidelity(a.rho, rho) > 0.98
    assert a.log_likelihood >= tomo.log_likelihood(tomo.project_psd(tomo.linear_inversion(table, st)), table, st) - 1e-6


def test_mle_missing_projectors():
    st = tomo.TomoSettings.two_qubit()
    table = st.probabilities(np.eye(4) / 4)
    del table[("HV|pm2", "H,+2")]
    assert tomo.missing_projectors(table, st) == [("HV|pm2", "H,+2")]
    with pytest.raises(DataError, match="HV\\|pm2/H,\\+2"):
        tomo.mle_state_tomo(table, st)


@pytest.mark.parametrize("dof", ["pol", "oam"])
def test_stokes_reconstruction(dof):
    rng = np.random.default_rng(7)
    rho = random_density_matrix(rng, d=2)
    s, est = tomo.stokes_reconstruct(tomo.single_qubit_probabilities(rho, dof), dof)
    assert np.allclose(est, rho, atol=1e-12)
    assert np.linalg.norm(s) <= 1 + 1e-12


def test_stokes_clips_to_bloch_sphere():
    table = {("DA", "D"): 1, ("DA", "A"): 0, ("LR", "L"): 1, ("LR", "R"): 0, ("HV", "H"): 1, ("HV", "V"): 0}
    s, rho = tomo.stokes_reconstruct(table, "pol")
    assert np.linalg.norm(s) == pytest.approx(1.0)
    metrics.check_density_matrix(rho)
    with pytest.raises(DataError):
        tomo.stokes_reconstruct({("HV", "H"): 1, ("HV", "V"): 1}, "pol")


def test_process_tomography_of_unitaries():
    rng = np.random.default_rng(8)
    for _ in range(5):
        u = random_unitary(rng, 2)
        outs = [u @ tomo._input_dm(l) @ u.conj().T for l in ("H", "V", "D", "L")]
        res = tomo.process_tomo(["H", "V", "D", "L"], outs)
        assert np.allclose(res.chi, tomo.pauli_transfer_chi(u), atol=1e-8)


def test_process_identity_and_depolarizing():
    labels = ["H", "V", "D", "L"]
    res = tomo.process_tomo(labels, [tomo._input_dm(l) for l in labels])
    assert metrics.process_fidelity(res.chi) == pytest.approx(1.0, abs=1e-9)
    p = 0.2
    outs = [(1 - p) * tomo._input_dm(l) + p * np.eye(2) / 2 for l in labels]
    res = tomo.process_tomo(labels, outs)
    assert res.chi[0, 0].real == pytest.approx(1 - 3 * p / 4, abs=1e-9)
    assert np.allclose(np.diag(res.chi).real[1:], p / 4, atol=1e-9)


def test_process_projection_restores_cptp():
    labels = ["H", "V", "D", "L"]
    outs = [np.array([[1.05, 0], [0, -0.05]]), tomo._input_dm("V"), tomo._input_dm("D"), tomo._input_dm("L")]
    res = tomo.process_tomo(labels, outs)
    assert np.linalg.eigvalsh(res.chi).min() > -1e-8
    assert tomo._tp_error(res.chi) < 1e-8
    assert res.projection_distance > 0


def test_process_rejects_incomplete_inputs():
    with pytest.raises(DataError):
        tomo.process_tomo(["H", "V", "H", "V"], [np.eye(2) / 2] * 4)
    with pytest.raises(DataError):
        tomo.process_tomo(["H"], [])


def test_bell_state_round_trip_through_sampler():
    st = tomo.TomoSettings.two_qubit()
    psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    table = _sampled_table(st, np.outer(psi, psi), 100_000, 1)
    res = tomo.mle_state_tomo(table, st)
    assert metrics.state_fidelity(res.rho, psi) >= 0.999
