"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are repeated in
the "acceptance criteria" section at the end of the pytest output.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from acceptance_log import record
from helpers import max_oracle_deviation
from oracles import random_density_matrix, two_photon_coincidence

from qpsim import metrics
from qpsim import scenarios as sc
from qpsim.constants import TAU_C_PS
from qpsim.measurement import sample_counts
from qpsim.tomography import TomoSettings, mle_state_tomo


class Checks:
    def __init__(self):
        self.items = []
        self.start = time.perf_counter()

    def add(self, name, ok, value=""):
        self.items.append((name, bool(ok), value))

    def finish(self, number, limit_s=None):
        elapsed = time.perf_counter() - self.start
        if limit_s is not None:
            self.add(f"runtime<{limit_s}s", elapsed < limit_s, f"{elapsed:.2f}")
        failed = [f"{n}={v}" for n, ok, v in self.items if not ok]
        detail = "all checks met" if not failed else "failed: " + "; ".join(failed)
        record(number, not failed, elapsed, detail)
        assert not failed, detail


def test_criterion_1_entanglement():
    c = Checks()
    for pol in ("H", "V"):
        r = sc.run_entanglement_gen(pol)
        c.add(f"F_{pol}", r.metrics["fidelity"] >= 1 - 1e-9, r.metrics["fidelity"])
        c.add(f"C_{pol}", abs(r.metrics["concurrence"] - 1) <= 1e-9, r.metrics["concurrence"])
    cp = sc.run_entanglement_gen("H", sc.calibrated_preset("entanglement")).metrics["concurrence"]
    c.add("C_preset", abs(cp - 0.95) <= 0.01, cp)
    c.finish(1, limit_s=1.0)


def test_criterion_2_circular_purity():
    c = Checks()
    r = sc.run_entanglement_gen("H")
    c.add("purity_plus2", abs(r.metrics["circular_purity_plus2"] - 1) <= 1e-12, r.metrics["circular_purity_plus2"])
    c.finish(2, limit_s=1.0)


def test_criterion_3_transferrers():
    c = Checks()
    for name, runner in (("pi-l", sc.run_transferrer_pi_to_l), ("l-pi", sc.run_transferrer_l_to_pi)):
        for label in sc.CARDINAL:
            r = runner(label)
            f = r.metrics[f"fidelity_{label}"]
            c.add(f"{name}_F_{label}", abs(f - 1) <= 1e-9, f)
            c.add(f"{name}_p_{label}", abs(r.success_probability - 0.5) <= 1e-12, r.success_probability)
    c.finish(3, limit_s=5.0)


def test_criterion_4_double_transfer():
    c = Checks()
    r = sc.run_double_transfer()
    c.add("chi_II", abs(r.metrics["chi_II"] - 1) <= 1e-9, r.metrics["chi_II"])
    c.add("imag", r.metrics["max_abs_imag"] < 1e-9, r.metrics["max_abs_imag"])
    p = sc.run_double_transfer(sc.calibrated_preset("double-transfer"))
    c.add("chi_II_preset", 0.935 <= p.metrics["chi_II"] <= 0.965, p.metrics["chi_II"])
    # unconverted light adds a small coherent error, so only "approximately zero" here
    c.add("imag_preset", p.metrics["max_abs_imag"] < 1e-2, p.metrics["max_abs_imag"])
    c.finish(4, limit_s=10.0)


def _first_quantized_rate(t_d):
    a = 1 / math.sqrt(2)
    gamma = math.exp(-(t_d**2) / (2 * TAU_C_PS**2))
    return two_photon_coincidence(np.array([a, 0, 0, a]), np.array([-1j * a, 0, 0, 1j * a]), (0, 1), (2, 3), gamma)


def test_criterion_5_hom_dip():
    c = Checks()
    t = np.linspace(-1.5, 1.5, 61)
    r = sc.run_hom_scan(t)
    c0 = [row["coincidence_prob"] for row in r.scan if row["t_d_ps"] == 0.0]
    c.add("C(0)==0", c0 == [0.0], c0)
    c.add("V", abs(r.metrics["visibility"] - 1) <= 1e-9, r.metrics["visibility"])
    c_inf = r.probabilities["C_inf_exact"]
    dev = max(
        abs(row["coincidence_prob"] - c_inf * (1 - math.exp(-(row["t_d_ps"] ** 2) / TAU_C_PS**2))) for row in r.scan
    )
    c.add("scan_vs_gamma", dev <= 1e-9, dev)
    dev = max(abs(row["coincidence_prob"] - _first_quantized_rate(row["t_d_ps"])) for row in r.scan)
    c.add("scan_vs_first_quantized", dev <= 1e-9, dev)
    good = 0
    for seed in range(20):
        v = sc.run_hom_scan(t, shots=10_000, seed=seed).metrics["visibility"]
        good += v >= 0.99
    c.add("sampled_V>=0.99", good >= 18, f"{good}/20")
    for label, noise in (("eps=0.05", sc.NoiseParams(distinguishability_eps=0.05)), ("preset", sc.calibrated_preset("hom-scan"))):
        v = sc.run_hom_scan(t, noise).metrics["visibility"]
        c.add(f"V_{label}", abs(v - 0.95) <= 0.01, v)
    c.finish(5, limit_s=30.0)


def test_criterion_6_coalescence():
    """Ideal Gamma and the calibrated preset.

    The literal ``eps = 0.03`` clause is checked separately below: with the
    same distinguishability that gives the dip visibility ``V = 1 - eps``,
    ``Gamma = 1 + V = 2 - eps``, so 0.03 yields 1.97 rather than 1.94.
    """
    c = Checks()
    g = sc.run_coalescence_enhancement().metrics["gamma"]
    c.add("Gamma_ideal", abs(g - 2) <= 1e-9, g)
    gp = sc.run_coalescence_enhancement(noise=sc.calibrated_preset("coalescence")).metrics["gamma"]
    c.add("Gamma_preset", abs(gp - 1.94) <= 0.01, gp)
    for eps in (0.01, 0.03, 0.1):
        noise = sc.NoiseParams(distinguishability_eps=eps)
        ge = sc.run_coalescence_enhancement(noise=noise).metrics["gamma"]
        v = sc.run_hom_scan([0.0, 3.0], noise).metrics["visibility"]
        c.add(f"Gamma=1+V@{eps}", abs(ge - (1 + v)) <= 1e-9, ge)
    g003 = sc.run_coalescence_enhancement(noise=sc.NoiseParams(distinguishability_eps=0.03)).metrics["gamma"]
    c.add("literal_eps=0.03->1.94", abs(g003 - 1.94) <= 0.01, f"{g003:.4f}")
    elapsed = time.perf_counter() - c.start
    c.add("runtime<10s", elapsed < 10.0, f"{elapsed:.2f}")
    failed = [f"{n}={v}" for n, ok, v in c.items if not ok]
    record(6, not failed, elapsed, "all checks met" if not failed else "failed: " + "; ".join(failed))
    attainable = [n for n, ok, _ in c.items if not ok and not n.startswith("literal")]
    assert not attainable


@pytest.mark.xfail(strict=True, reason="Gamma = 1 + V forces 2 - eps; eps = 0.03 gives 1.97 (see decisions ledger)")
def test_criterion_6_literal_eps_003():
    g = sc.run_coalescence_enhancement(noise=sc.NoiseParams(distinguishability_eps=0.03)).metrics["gamma"]
    assert abs(g - 1.94) <= 0.01


def test_criterion_7_erasure():
    c = Checks()
    r0, rinf = sc.erasure_rates(0.0), sc.erasure_rates(math.inf)
    for v in ("d_plus", "d_minus"):
        c.add(f"same_{v}", abs(r0[f"same_{v}"]) <= 1e-12, r0[f"same_{v}"])
    for v in ("d_R", "d_L"):
        c.add(f"same_{v}=2x", abs(r0[f"same_{v}"] - 2 * rinf[f"same_{v}"]) <= 1e-9, r0[f"same_{v}"] / rinf[f"same_{v}"])
    vc = sc.run_erasure_correlations("d_RL").metrics["correlation_visibility"]
    c.add("V_corr_ideal", abs(vc - 1) <= 1e-12, vc)
    m = sc.run_erasure_correlations(noise=sc.calibrated_preset("erasure")).metrics
    c.add("V_corr_preset", abs(m["correlation_visibility"] - 0.86) <= 0.02, m["correlation_visibility"])
    c.add("V_dip_preset", abs(m["dip_visibility"] - 0.91) <= 0.01, m["dip_visibility"])
    c.finish(7, limit_s=10.0)


def test_criterion_8_tomography_round_trip():
    c = Checks()
    st = TomoSettings.two_qubit()
    rng = np.random.default_rng(2009)
    worst = 1.0
    for i in range(50):
        rho = random_density_matrix(rng, rank=1 + i % 4)
        worst = min(worst, metrics.fidelity(mle_state_tomo(st.probabilities(rho), st).rho, rho))
    c.add("exact_min_F", worst >= 0.9999, worst)
    fids = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        rho = random_density_matrix(rng, rank=1 + seed % 4)
        table = {}
        seeds = np.random.SeedSequence(seed).generate_state(len(st.projectors))
        for (s, outcomes), sd in zip(st.projectors.items(), seeds):
            probs = [(o, float(np.real(np.trace(p @ rho)))) for o, p in outcomes.items()]
            for rec in sample_counts(probs, 10_000, int(sd), setting=s):
                table[(s, rec.pattern)] = rec.counts
        fids.append(metrics.fidelity(mle_state_tomo(table, st.with_options(seed=seed)).rho, rho))
    c.add("sampled_mean_F", np.mean(fids) >= 0.99, float(np.mean(fids)))
    c.finish(8, limit_s=60.0)


def test_criterion_9_oracle_equivalence():
    c = Checks()
    dev = max_oracle_deviation(200, seed=2009)
    c.add("max_abs_damp", dev < 1e-10, dev)
    c.finish(9, limit_s=60.0)


SUITE = [
    ["scenario", "entanglement", "--shots", "10000"],
    ["scenario", "entanglement", "--input", "V", "--preset", "paper-2009"],
    ["scenario", "transferrer-pi-l", "--shots", "10000"],
    ["scenario", "transferrer-l-pi", "--shots", "10000", "--preset", "paper-2009"],
    ["scenario", "double-transfer", "--shots", "10000"],
    ["scenario", "hom-scan", "--shots", "10000"],
    ["scenario", "coalescence", "--shots", "10000", "--preset", "paper-2009"],
    ["scenario", "erasure", "--shots", "10000", "--basis", "d_RL"],
    ["circuit", "fig1", "--state", "biphoton", "--measure", "D_A@A:oam=0,D_B@B:oam=0"],
    ["scan", "hom-scan", "--param", "distinguishability_eps", "--values", "0:0.1:3", "--steps", "11"],
]


def _run_suite(out, hash_seed):
    env = dict(os.environ, PYTHONHASHSEED=str(hash_seed))
    for args in SUITE:
        subprocess.run([sys.executable, "-m", "qpsim", *args, "--seed", "11", "--out", str(out)],
                       check=True, capture_output=True, env=env)
    subprocess.run([sys.executable, "-m", "qpsim", "tomo", str(out / "entanglement.counts.csv"), "--mode", "state2",
                    "--seed", "11", "--out", str(out)], check=True, capture_output=True, env=env)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_criterion_10_determinism(tmp_path):
    c = Checks()
    a = _run_suite(tmp_path / "a", 1)
    b = _run_suite(tmp_path / "b", 2)
    c.add("same_files", sorted(a) == sorted(b), len(a))
    differing = [k for k in a if a.get(k) != b.get(k)]
    c.add("bit_identical", not differing, differing)
    c.finish(10)
