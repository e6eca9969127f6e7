"""Command-line entry point.

    ququart run CONFIG [--seed N] [--shots N] [--out DIR] [--allow-nonconverged]
    ququart transpile CIRCUIT [--out FILE]
    ququart validate FILE

Exit codes: 0 success, 2 schema or parse error, 3 numerical failure or
non-converged fit, 4 transpiler verification failure.  The default output
directory is ``$QUQUART_OUT`` or ``./results``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import basis_state, fidelity
from .experiments import (
    bell_experiment,
    bell_state,
    ms_scan,
    rabi_fidelity,
    rabi_scan,
    synthetic_parity_state,
)
from .fitting import fit_damped_sine
from .io import (
    ConfigError,
    config_hash,
    grid_from_config,
    load_circuit,
    load_config,
    load_json,
    motion_from_config,
    noise_from_config,
    parse_circuit,
    pulse_params_from_config,
    scan_to_csv,
    summary_json,
    validate_config,
    write_text,
)
from .ms import evolve_ms, first_interior_minimum
from .transpiler import TranspileError, equivalence_residual, transpile_circuit

logger = logging.getLogger("ququart")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
OUT_ENV = "QUQUART_OUT"
DEFAULT_SHOTS = 300
DEFAULT_BOOTSTRAP = 200


def _out_dir(args_out, config) -> Path:
    if args_out:
        return Path(args_out)
    if "output" in config and "dir" in config["output"]:
        return Path(config["output"]["dir"])
    return Path(os.environ.get(OUT_ENV, "results"))


def _prefix(config, default):
    return config.get("output", {}).get("prefix", default)


def _run_rabi(config):
    omega = 2 * np.pi * config["rabi_frequency_hz"]
    shots = config.get("shots", DEFAULT_SHOTS)
    scan = rabi_scan(config.get("ion", 0), config["level"], grid_from_config(config["grid"]), shots,
                     noise_from_config(config), config.get("seed", 0), omega)
    curve = f"P{config['level']}"
    fit = fit_damped_sine(scan, curve, n_bootstrap=config.get("bootstrap", DEFAULT_BOOTSTRAP), seed=config.get("seed", 0))
    summary = {"experiment": "rabi", "shots": shots, "seed": config.get("seed", 0), "fit": fit.to_dict(),
               "converged": fit.converged}
    if fit.converged:
        est = rabi_fidelity(fit)
        summary["rabi_fidelity"] = {"value": est.value, "stderr": est.stderr, "bootstrap_stderr": est.bootstrap_stderr}
    return scan, summary, fit.converged


def _gate_summary(params):
    return {"rabi_frequency_hz": params.omega_rabi / (2 * np.pi), "detuning_hz": params.delta / (2 * np.pi),
            "eta": params.eta, "gate_duration": params.tau, "mode_frequency_hz": params.omega_m / (2 * np.pi)}


def _run_ms_scan(config):
    params = pulse_params_from_config(config)
    motion = motion_from_config(config)
    shots = config.get("shots", DEFAULT_SHOTS)
    scan = ms_scan(params, grid_from_config(config["grid"]), shots, motion, noise_from_config(config),
                   config.get("seed", 0))
    rho = evolve_ms(basis_state((4, 4), (0, 0)), motion, params, params.tau)
    tmin = first_interior_minimum(scan.grid, scan.estimates["P01+P10"])
    summary = {"experiment": "ms-scan", "shots": shots, "seed": config.get("seed", 0), "gate": _gate_summary(params),
               "nbar": motion.nbar, "first_minimum_P01+P10": tmin,
               "bell_fidelity_exact": fidelity(rho, bell_state())}
    return scan, summary, True


def _run_parity(config):
    shots = config.get("shots", DEFAULT_SHOTS)
    grid = config.get("grid")
    phis = grid_from_config(grid) if grid else np.linspace(0, np.pi, 20, endpoint=False)
    if "state" in config:
        state = synthetic_parity_state(config["state"]["A"], config["state"]["phi0"])
        origin = {"synthetic": config["state"]}
    else:
        params = pulse_params_from_config(config)
        motion = motion_from_config(config)
        state = evolve_ms(basis_state((4, 4), (0, 0)), motion, params, params.tau)
        origin = {"gate": _gate_summary(params), "nbar": motion.nbar}
    res = bell_experiment(phis, shots, noise_from_config(config), config.get("seed", 0), state=state,
                          n_bootstrap=config.get("bootstrap", DEFAULT_BOOTSTRAP))
    fit = res["fit"]
    summary = {"experiment": config["experiment"], "shots": shots, "seed": config.get("seed", 0), "state": origin,
               "A": fit["A"], "phi0": fit["phi0"], "fit": fit.to_dict(),
               "P00": {"value": res["P00"].value, "stderr": res["P00"].stderr},
               "P11": {"value": res["P11"].value, "stderr": res["P11"].stderr},
               "F_Bell": {"value": res["fidelity"].value, "stderr": res["fidelity"].stderr},
               "converged": fit.converged}
    return res["scan"], summary, fit.converged


def _circuit_from_config(config, base: Path):
    c = config["circuit"]
    if isinstance(c, str):
        p = Path(c)
        return load_circuit(p if p.is_absolute() else base / p)
    return parse_circuit(c)


def _transpile(circuit, out_path: Path, sha: str) -> int:
    try:
        native = transpile_circuit(circuit)
    except TranspileError as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    residual = equivalence_residual(circuit, native)
    write_text(out_path, native.to_json() + "\n")
    report = {"input": circuit.to_dict(), "residual": residual, "native_op_count": native.metadata["native_op_count"],
              "wall_time": native.metadata["wall_time"], "verified": residual <= 1e-7}
    write_text(out_path.with_suffix(".report.json"), summary_json(report, sha))
    print(f"wrote {out_path} ({len(native.ops)} native ops, residual {residual:.3g})")
    return EXIT_OK if residual <= 1e-7 else EXIT_VERIFY


RUNNERS = {"rabi": _run_rabi, "ms-scan": _run_ms_scan, "parity": _run_parity, "bell": _run_parity}


def cmd_run(args) -> int:
    try:
        config = load_config(args.config, {"seed": args.seed, "shots": args.shots})
        sha = config_hash(config)
        out = _out_dir(args.out, config)
        if config["experiment"] == "transpile":
            circuit = _circuit_from_config(config, Path(args.config).parent)
            return _transpile(circuit, out / f"{_prefix(config, 'native')}.json", sha)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    kind = config["experiment"]
    try:
        scan, summary, converged = RUNNERS[kind](config)
        if not all(np.all(np.isfinite(v)) for v in scan.estimates.values()):
            raise FloatingPointError("non-finite values in scan output")
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        write_text(out / "summary.json", summary_json({"experiment": kind, "error": str(e)}, sha))
        return EXIT_NUMERIC
    name = _prefix(config, kind.replace("-", "_"))
    write_text(out / f"{name}.csv", scan_to_csv(scan, sha))
    write_text(out / "summary.json", summary_json(summary, sha))
    print(f"wrote {out / (name + '.csv')} and {out / 'summary.json'}")
    if not converged and not args.allow_nonconverged:
        print("fit did not converge (use --allow-nonconverged to accept)", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_transpile(args) -> int:
    try:
        data = load_json(args.circuit)
        circuit = parse_circuit(data)
    except (ConfigError, OSError) as e:
        print(f"circuit error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "results")) / (Path(args.circuit).stem + ".native.json")
    return _transpile(circuit, out, config_hash(data))


def cmd_validate(args) -> int:
    try:
        data = load_json(args.file)
        if isinstance(data, dict) and "experiment" in data:
            validate_config(data)
            kind = "config"
        else:
            parse_circuit(data)
            kind = "circuit"
    except (ConfigError, OSError) as e:
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"valid {kind}: {args.file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ququart", description="Two-ququart processor simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--shots", type=int, help="shots per point; 0 gives exact expectation values")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    r.add_argument("--allow-nonconverged", action="store_true")
    r.set_defaults(func=cmd_run)
    t = sub.add_parser("transpile", help="compile a qubit circuit file to native ops")
    t.add_argument("circuit")
    t.add_argument("--out", help="output file for the native circuit")
    t.set_defaults(func=cmd_transpile)
    v = sub.add_parser("validate", help="check a config or circuit file against its schema")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_SCHEMA if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
