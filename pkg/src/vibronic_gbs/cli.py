"""Command-line front end.

Exit codes: 0 success, 1 ``validate`` found a failing check, 2 invalid input,
3 numerical failure, 4 the Fock cutoff could not reach the requested mass.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .errors import EmptyTable, InsufficientTruncation, NumericalError, ValidationError
from .fock import build_fcp, sample, transition_table
from .formats import SCHEMA_VERSION
from .validation import run_checks
from .vibronic import compile_circuit

log = logging.getLogger("vibronic_gbs")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_TRUNCATION = 4


def _overrides(args) -> dict:
    return {
        "n_max": args.n_max,
        "target_mass": args.target_mass,
        "bin_width": args.bin_width,
        "seed": args.seed,
        "tolerance": args.tolerance,
    }


def load_job(args, strict: bool = True):
    """Return ``(config, circuit)``; ``circuit`` is None unless the input is a circuit file."""
    doc = formats.load_json(args.input)
    if not isinstance(doc, dict):
        raise ValidationError("input must be a JSON object")
    if doc.get("kind") == "circuit":
        circuit, config = formats.circuit_from_json(doc, strict=strict)
        if args.temperature is not None and args.temperature != config.temperature:
            raise ValidationError("--temperature cannot change a compiled circuit; recompile from the config")
        return formats.with_job_overrides(config, **_overrides(args)), circuit
    doc = formats.apply_overrides(doc, temperature=args.temperature, **_overrides(args))
    return formats.parse_config(doc, strict=strict), None


def _circuit(args, strict: bool = True):
    config, circuit = load_job(args, strict)
    if circuit is None:
        tols = config.tolerances
        circuit = compile_circuit(config.molecule, config.temperature, tols.constraint, tols.reconstruction)
    return config, circuit


def _emit(paths) -> None:
    print(json.dumps({"schema_version": SCHEMA_VERSION, "written": [str(p) for p in paths]}))


def cmd_compile(args) -> int:
    config, circuit = _circuit(args)
    out = formats.write_json_atomic(Path(args.output_dir) / "circuit.json", formats.circuit_to_json(circuit, config))
    _emit([out])
    return EXIT_OK


def cmd_spectrum(args) -> int:
    config, circuit = _circuit(args)
    table = transition_table(circuit, config.truncation)
    spectrum = build_fcp(table, config.molecule, config.bin_width)
    # Render both files before writing either so a failure leaves nothing behind.
    sticks = formats.sticks_csv(spectrum, table, config)
    histogram = formats.histogram_csv(spectrum, table, config)
    out = Path(args.output_dir)
    _emit([formats.write_text_atomic(out / "sticks.csv", sticks), formats.write_text_atomic(out / "histogram.csv", histogram)])
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.count < 0:
        raise ValidationError("--count must be >= 0")
    config, circuit = _circuit(args)
    table = transition_table(circuit, config.truncation)
    draws = sample(table, args.count, config.seed)
    text = formats.samples_csv(draws, table, config, config.seed)
    _emit([formats.write_text_atomic(Path(args.output_dir) / "samples.csv", text)])
    return EXIT_OK


def cmd_validate(args) -> int:
    config, _ = load_job(args, strict=False)
    checks = run_checks(config)
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if args.output_dir is not None:
        report = {
            "schema_version": SCHEMA_VERSION,
            "kind": "validation",
            "label": config.molecule.label,
            "temperature_K": config.temperature,
            "checks": [c.to_json() for c in checks],
            "passed": not failed,
        }
        formats.write_json_atomic(Path(args.output_dir) / "validation.json", report)
    return EXIT_OK if not failed else EXIT_CHECKS_FAILED


def cmd_sweep(args) -> int:
    if args.t_step <= 0 or args.t_max < args.t_min or args.t_min < 0:
        raise ValidationError("need 0 <= --t-min <= --t-max and --t-step > 0")
    config, circuit = load_job(args)
    if circuit is not None:
        raise ValidationError("sweep needs a molecule config, not a compiled circuit")
    temps = np.arange(args.t_min, args.t_max + 0.5 * args.t_step, args.t_step)
    tols = config.tolerances
    squeezing = np.array(
        [compile_circuit(config.molecule, float(t), tols.constraint, tols.reconstruction).squeezing for t in temps]
    )
    db = 10.0 * np.log10(np.exp(-2.0 * squeezing))
    text = formats.squeezing_csv(temps, squeezing, db, config.molecule.label)
    _emit([formats.write_text_atomic(Path(args.output_dir) / "squeezing_sweep.csv", text)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibronic-gbs",
        description="Compile finite-temperature vibronic spectra into zero-temperature boson-sampling circuits.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output_default="."):
        p.add_argument("--input", required=True, help="molecule config JSON or compiled circuit JSON")
        p.add_argument("--output-dir", default=output_default)
        p.add_argument("--temperature", type=float, help="kelvin; overrides temperature_K")
        p.add_argument("--n-max", type=int, help="per-mode photon cutoff")
        p.add_argument("--target-mass", type=float, help="required captured probability")
        p.add_argument("--bin-width", type=float, help="histogram bin width in cm^-1")
        p.add_argument("--seed", type=int)
        p.add_argument("--tolerance", type=float, help="constraint and reconstruction tolerance")
        return p

    common(sub.add_parser("compile", help="write circuit.json")).set_defaults(func=cmd_compile)
    common(sub.add_parser("spectrum", help="write sticks.csv and histogram.csv")).set_defaults(func=cmd_spectrum)
    p = common(sub.add_parser("sample", help="write samples.csv"))
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(func=cmd_sample)
    common(sub.add_parser("validate", help="run the invariant suite"), output_default=None).set_defaults(
        func=cmd_validate
    )
    p = common(sub.add_parser("sweep", help="squeezing versus temperature"))
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=650.0)
    p.add_argument("--t-step", type=float, default=50.0)
    p.set_defaults(func=cmd_sweep)
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
    }
    if isinstance(exc, InsufficientTruncation):
        payload["captured_mass"] = exc.captured_mass
        payload["n_max"] = exc.n_max
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except InsufficientTruncation as exc:
        return _fail(exc, EXIT_TRUNCATION)
    except (ValidationError, EmptyTable) as exc:
        return _fail(exc, EXIT_INVALID)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _fail(exc, EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
