"""Command-line front end.

Exit codes: 0 success, 2 user or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import metrics
from .circuit import CircuitSpec, apply
from .constants import BANDWIDTH_NM, DEFAULT_SEED, OUTPUT_ENV, WAVELENGTH_NM, coherence_time
from .errors import QpsimError
from .fock import PhotonicState
from .measurement import (
    DetectorSpec,
    density_matrix_to_json,
    outcome_probability,
    pattern,
    read_counts_csv,
    write_counts_csv,
)
from .scenarios import (
    ERASURE_BASES,
    IDEAL,
    SCENARIOS,
    NoiseParams,
    ScenarioResult,
    calibrated_preset,
    write_scan_csv,
)
from . import scenarios
from .tomography import (
    OAM_BASES,
    POL_BASES,
    TomoSettings,
    counts_table,
    missing_projectors,
    mle_state_tomo,
    process_tomo,
    stokes_reconstruct,
)

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3
PRESETS = ("paper-2009",)

#: Short names printed in the one-line summary.
SUMMARY_KEYS = {
    "entanglement": [("C", "concurrence"), ("F", "fidelity"), ("purity_R", "circular_purity_plus2")],
    "transferrer-pi-l": [("F_mean", "mean_fidelity"), ("F_min", "min_fidelity")],
    "transferrer-l-pi": [("F_mean", "mean_fidelity"), ("F_min", "min_fidelity")],
    "double-transfer": [("chi_II", "chi_II")],
    "hom-scan": [("V", "visibility"), ("C_inf", "C_inf"), ("C_min", "C_min")],
    "coalescence": [("Gamma", "gamma")],
    "erasure": [("V_dip", "dip_visibility"), ("V_corr", "correlation_visibility")],
}

NOISE_KEYS = {
    "depolarizing_p": float,
    "oam_dephasing": float,
    "distinguishability_eps": float,
    "eta": float,
    "transmittance": float,
    "hologram_efficiency": float,
    "qplate_model": str,
}


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


def summary_line(result: ScenarioResult) -> str:
    parts = [result.name]
    for short, key in SUMMARY_KEYS.get(result.name, []):
        parts.append(f"{short}={result.metrics[key]:.6f}")
    parts.append(f"p_success={result.success_probability:.6f}")
    return " ".join(parts)


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def parse_noise(items, base: NoiseParams) -> NoiseParams:
    kw = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in NOISE_KEYS:
            raise UsageError(f"--noise expects key=value with key in {', '.join(NOISE_KEYS)}; got {item!r}")
        try:
            kw[key] = NOISE_KEYS[key](value)
        except ValueError:
            raise UsageError(f"--noise {key}: cannot parse {value!r}") from None
    return base.override(**kw) if kw else base


def _tau_c(args) -> float:
    return coherence_time(args.wavelength_nm, args.bandwidth_nm)


def _parse_input_state(text: str):
    if text == "all" or text in scenarios.CARDINAL:
        return text
    try:
        parts = [complex(x.replace(" ", "")) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--input must be a cardinal label, 'all' or 'alpha,beta'; got {text!r}") from None
    if len(parts) != 2:
        raise UsageError("--input alpha,beta needs exactly two amplitudes")
    return tuple(parts)


def _run_scenario(name: str, args) -> ScenarioResult:
    if args.preset and args.ideal:
        raise UsageError("--preset and --ideal are mutually exclusive")
    base = calibrated_preset(name) if args.preset else IDEAL
    noise = parse_noise(args.noise, base)
    common = {"noise": noise, "shots": args.shots, "seed": args.seed}
    if name == "entanglement":
        inp = args.input or "H"
        if inp not in ("H", "V"):
            raise UsageError("entanglement --input must be H or V")
        return scenarios.run_entanglement_gen(inp, **common)
    if name in ("transferrer-pi-l", "transferrer-l-pi"):
        return SCENARIOS[name](_parse_input_state(args.input or "all"), **common)
    if name == "double-transfer":
        return scenarios.run_double_transfer(**common)
    if name == "hom-scan":
        if args.steps < 1:
            raise UsageError("--steps must be at least 1")
        t = np.linspace(args.tmin, args.tmax, args.steps) if args.steps > 1 else np.array([args.tmin])
        return scenarios.run_hom_scan([float(x) for x in t], tau_c=_tau_c(args), **common)
    if name == "coalescence":
        return scenarios.run_coalescence_enhancement(args.t_d, tau_c=_tau_c(args), **common)
    if name == "erasure":
        if args.basis not in ERASURE_BASES:
            raise UsageError(f"--basis must be one of {', '.join(ERASURE_BASES)}")
        return scenarios.run_erasure_correlations(args.basis, t_d=args.t_d, tau_c=_tau_c(args), **common)
    raise UsageError(f"unknown scenario {name!r}")


def _gnuplot(csv_name: str, xlabel: str, ylabel: str, columns=(2,)) -> str:
    lines = [
        'set datafile separator ","',
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
        "set key autotitle columnhead",
    ]
    plots = ", ".join(f'"{csv_name}" using 1:{c} with linespoints' for c in columns)
    lines.append(f"plot {plots}")
    return "\n".join(lines) + "\n"


def cmd_scenario(args) -> int:
    if args.name not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.name!r}; catalog: {', '.join(SCENARIOS)}")
    result = _run_scenario(args.name, args)
    out = _out_dir(args)
    if args.format in ("json", "all"):
        _dump_json(out / f"{args.name}.result.json", result.to_json())
    if args.format in ("csv", "all"):
        if result.scan is not None:
            with open(out / f"{args.name}.scan.csv", "w") as fh:
                write_scan_csv(result, fh)
            (out / f"{args.name}.gp").write_text(
                _gnuplot(f"{args.name}.scan.csv", "t_d (ps)", "coincidence probability")
            )
        if result.counts:
            with open(out / f"{args.name}.counts.csv", "w") as fh:
                write_counts_csv(result.counts, fh)
    print(summary_line(result))
    return EXIT_OK


def _scan_values(spec: str) -> list[float]:
    try:
        start, stop, n = spec.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(n))]
    except ValueError:
        raise UsageError(f"--values must be start:stop:count, got {spec!r}") from None


def cmd_scan(args) -> int:
    """Sweep one noise parameter of a scenario and tabulate its metrics."""
    if args.name not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.name!r}; catalog: {', '.join(SCENARIOS)}")
    if args.param not in NOISE_KEYS or NOISE_KEYS[args.param] is not float:
        raise UsageError(f"--param must be a numeric noise key: {', '.join(k for k, t in NOISE_KEYS.items() if t is float)}")
    keys = [key for _, key in SUMMARY_KEYS[args.name]]
    rows = []
    for value in _scan_values(args.values):
        sub = argparse.Namespace(**vars(args))
        sub.noise = list(args.noise or []) + [f"{args.param}={value!r}"]
        result = _run_scenario(args.name, sub)
        rows.append([value] + [result.metrics[k] for k in keys] + [result.success_probability])
    out = _out_dir(args)
    stem = f"{args.name}.{args.param}"
    header = [args.param] + keys + ["success_probability"]
    with open(out / f"{stem}.scan.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    (out / f"{stem}.gp").write_text(_gnuplot(f"{stem}.scan.csv", args.param, "metric", range(2, len(keys) + 2)))
    for row in rows:
        print(" ".join(f"{h}={v:.6f}" for h, v in zip(header, row)))
    return EXIT_OK


def _load_json(path: Path, what: str):
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {what} {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _resolve_shipped(arg: str, suffix: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    shipped = resources.files("qpsim") / "circuits" / f"{arg}{suffix}"
    if shipped.is_file():
        return Path(str(shipped))
    return p


def parse_pattern(text: str):
    """``id@path[:pol=H][:oam=0][:n=2],...`` -> CoincidencePattern."""
    detectors, required = [], {}
    for item in text.split(","):
        head, *opts = item.strip().split(":")
        did, sep, path = head.partition("@")
        if not sep or not did or not path:
            raise UsageError(f"--measure detector must look like id@path[:pol=H][:oam=0][:n=2]; got {item!r}")
        kw = {}
        for opt in opts:
            k, _, v = opt.partition("=")
            if k == "pol":
                kw["pol"] = v
            elif k == "oam":
                kw["oam"] = int(v)
            elif k == "n":
                required[did] = int(v)
            else:
                raise UsageError(f"--measure: unknown detector option {k!r}")
        detectors.append(DetectorSpec(did, path, **kw))
    return pattern(*detectors, label=text, **required)


def cmd_circuit(args) -> int:
    spec = CircuitSpec.from_json(_load_json(_resolve_shipped(args.config, ".json"), "circuit"))
    state = PhotonicState.from_json(_load_json(_resolve_shipped(args.state, ".state.json"), "state"))
    out_state = apply(spec, state)
    result = {"state": out_state.to_json(), "success_probability": out_state.success_probability}
    if args.measure:
        probs = {}
        for text in args.measure:
            pat = parse_pattern(text)
            probs[text] = outcome_probability(out_state, pat, absolute=True)
            print(f"P[{text}]={probs[text]:.12g}")
        result["probabilities"] = probs
    stem = Path(args.config).stem
    _dump_json(_out_dir(args) / f"{stem}.output.json", result)
    print(f"success_probability={out_state.success_probability:.12g}")
    return EXIT_OK


_BELL = {
    "phi+": np.array([1, 0, 0, 1]) / math.sqrt(2),
    "phi-": np.array([1, 0, 0, -1]) / math.sqrt(2),
    "psi+": np.array([0, 1, 1, 0]) / math.sqrt(2),
    "psi-": np.array([0, 1, -1, 0]) / math.sqrt(2),
}


def _single_dof(table) -> str:
    bases = {s for s, _ in table}
    if bases <= set(POL_BASES):
        return "pol"
    if bases <= set(OAM_BASES):
        return "oam"
    raise UsageError(f"settings {sorted(bases)} are neither polarization nor OAM bases")


def cmd_tomo(args) -> int:
    path = Path(args.counts)
    try:
        with open(path) as fh:
            records = read_counts_csv(fh)
    except OSError as exc:
        raise OSError(f"cannot read counts {path}: {exc.strerror}") from exc
    table = counts_table(records)
    stem = path.name.removesuffix(".csv")
    out = _out_dir(args)
    if args.mode == "state2":
        settings = TomoSettings.two_qubit(seed=args.seed)
        missing = missing_projectors(table, settings)
        if missing:
            raise UsageError("missing projectors: " + ", ".join(f"{s}/{o}" for s, o in missing))
        res = mle_state_tomo(table, settings)
        rho = res.rho
        m = {
            "concurrence": metrics.concurrence(rho),
            "bell_fidelity": max(metrics.state_fidelity(rho, v) for v in _BELL.values()),
            "log_likelihood": res.log_likelihood,
        }
        converged = res.converged
    elif args.mode == "state1":
        dof = _single_dof(table)
        s, rho = stokes_reconstruct(table, dof)
        m = {"stokes_x": s[0], "stokes_y": s[1], "stokes_z": s[2], "purity": float(np.trace(rho @ rho).real)}
        converged = True
    else:
        groups: dict[str, dict] = {}
        for (setting, outcome), n in table.items():
            label, sep, basis = setting.partition(":")
            if not sep:
                raise UsageError(f"process settings must look like input:basis, got {setting!r}")
            groups.setdefault(label, {})[(basis, outcome)] = n
        labels = sorted(groups)
        outs = [stokes_reconstruct(groups[k], "pol")[1] for k in labels]
        proc = process_tomo(labels, outs)
        rho = proc.chi
        m = {"chi_II": metrics.process_fidelity(proc.chi), "projection_distance": proc.projection_distance}
        converged = True
    _dump_json(out / f"{stem}.{args.mode}.matrix.json", {"mode": args.mode, "matrix": density_matrix_to_json(rho)})
    _dump_json(out / f"{stem}.{args.mode}.metrics.json", {
        "mode": args.mode, "converged": bool(converged), "metrics": {k: float(v) for k, v in m.items()},
    })
    print(f"converged={converged} " + " ".join(f"{k}={v:.6f}" for k, v in m.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpsim", description="q-plate photonic simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")

    run = argparse.ArgumentParser(add_help=False, parents=[common])
    run.add_argument("--shots", type=int, default=None, help="sample counts instead of exact probabilities")
    run.add_argument("--ideal", action="store_true", help="no noise (default)")
    run.add_argument("--preset", choices=PRESETS, help="calibrated noise preset")
    run.add_argument("--noise", nargs="+", metavar="KEY=VALUE", help="noise overrides")
    run.add_argument("--input", help="input state: H/V, a cardinal label, 'all' or 'alpha,beta'")
    run.add_argument("--basis", default="d_plus_minus", help="erasure analysis basis")
    run.add_argument("--t-d", dest="t_d", type=float, default=0.0, help="delay in ps")
    run.add_argument("--tmin", type=float, default=-1.5)
    run.add_argument("--tmax", type=float, default=1.5)
    run.add_argument("--steps", type=int, default=61)
    run.add_argument("--wavelength-nm", type=float, default=WAVELENGTH_NM)
    run.add_argument("--bandwidth-nm", type=float, default=BANDWIDTH_NM)

    p = sub.add_parser("scenario", parents=[run], help="run a canned experiment")
    p.add_argument("name", help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--format", choices=("json", "csv", "all"), default="all")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("scan", parents=[run], help="sweep a noise parameter of a scenario")
    p.add_argument("name")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="start:stop:count")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("circuit", parents=[common], help="apply a circuit file to a state file")
    p.add_argument("config", help="circuit JSON path or shipped name (e.g. fig1)")
    p.add_argument("--state", required=True, help="state JSON path or shipped name (e.g. biphoton)")
    p.add_argument("--measure", action="append", help="coincidence pattern id@path[:pol=H][:oam=0][:n=2],...")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("tomo", parents=[common], help="reconstruct states or processes from counts")
    p.add_argument("counts")
    p.add_argument("--mode", choices=("state1", "state2", "process"), required=True)
    p.set_defaults(func=cmd_tomo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, QpsimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
