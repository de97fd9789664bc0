"""Job configuration and the JSON/CSV files exchanged by the command line.

Every file written here carries a ``schema_version``; readers refuse other
major versions. Floats go to CSV with 17 significant digits and to JSON via
``repr`` so that both round-trip exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fock import Spectrum, TransitionTable, TruncationPolicy
from .gaussian_core import (
    CONSTRAINT_TOL,
    RECONSTRUCTION_TOL,
    BogoliubovTransform,
    GaussianDecomposition,
)
from .vibronic import CircuitSpec, MolecularSystem

SCHEMA_VERSION = "1.0"
SCHEMA_MAJOR = 1

CONFIG_KEYS = {
    "schema_version",
    "label",
    "omega_initial",
    "omega_final",
    "duschinsky",
    "delta",
    "temperature_K",
    "truncation",
    "bin_width_cm1",
    "seed",
    "tolerances",
}
REQUIRED_KEYS = {"omega_initial", "omega_final", "duschinsky", "delta"}
TRUNCATION_KEYS = {"n_max", "target_mass", "memory_bytes"}
TOLERANCE_KEYS = {"constraint", "reconstruction"}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Tolerances:
    constraint: float = CONSTRAINT_TOL
    reconstruction: float = RECONSTRUCTION_TOL

    def __post_init__(self):
        for name in ("constraint", "reconstruction"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValidationError(f"tolerance {name!r} must be a positive number")


@dataclass(frozen=True)
class JobConfig:
    molecule: MolecularSystem
    temperature: float
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    bin_width: float = 10.0
    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        t = self.temperature
        if not (isinstance(t, (int, float)) and math.isfinite(t) and t >= 0):
            raise ValidationError(f"temperature_K must be a finite number >= 0, got {t!r}")
        if not (isinstance(self.bin_width, (int, float)) and math.isfinite(self.bin_width) and self.bin_width > 0):
            raise ValidationError("bin_width_cm1 must be > 0")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")
        object.__setattr__(self, "temperature", float(t))
        object.__setattr__(self, "bin_width", float(self.bin_width))

    def to_json(self) -> dict:
        """The configuration document this job would be parsed from."""
        mol = self.molecule
        trunc = {"target_mass": self.truncation.target_mass}
        if self.truncation.n_max is not None:
            trunc["n_max"] = int(self.truncation.n_max)
        return {
            "schema_version": SCHEMA_VERSION,
            "label": mol.label,
            "omega_initial": mol.omega_initial.tolist(),
            "omega_final": mol.omega_final.tolist(),
            "duschinsky": mol.duschinsky.tolist(),
            "delta": mol.delta.tolist(),
            "temperature_K": self.temperature,
            "truncation": trunc,
            "bin_width_cm1": self.bin_width,
            "seed": self.seed,
            "tolerances": {
                "constraint": self.tolerances.constraint,
                "reconstruction": self.tolerances.reconstruction,
            },
        }


def check_schema(doc: dict, what: str = "document") -> None:
    version = doc.get("schema_version", SCHEMA_VERSION)
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise ValidationError(f"{what}: malformed schema_version {version!r}") from None
    if major != SCHEMA_MAJOR:
        raise ValidationError(f"{what}: unsupported schema_version {version!r} (expected {SCHEMA_MAJOR}.x)")


def _unknown(keys, allowed, where: str) -> None:
    extra = sorted(set(keys) - allowed)
    if extra:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number")
    return float(value)


def parse_truncation(doc) -> TruncationPolicy:
    if doc is None:
        return TruncationPolicy()
    if not isinstance(doc, dict):
        raise ValidationError("truncation must be an object")
    _unknown(doc, TRUNCATION_KEYS, "truncation")
    n_max = doc.get("n_max")
    if n_max is not None and (isinstance(n_max, bool) or not isinstance(n_max, int)):
        raise ValidationError("truncation.n_max must be an integer")
    kwargs = {"n_max": n_max}
    if "target_mass" in doc:
        kwargs["target_mass"] = _number(doc["target_mass"], "truncation.target_mass")
    if "memory_bytes" in doc:
        kwargs["memory_bytes"] = int(_number(doc["memory_bytes"], "truncation.memory_bytes"))
    return TruncationPolicy(**kwargs)


def parse_config(doc, strict: bool = True) -> JobConfig:
    """Validate a configuration document.

    ``strict=False`` lets a non-orthogonal Duschinsky matrix through so the
    validation report can flag it.
    """
    if not isinstance(doc, dict):
        raise ValidationError("configuration must be a JSON object")
    check_schema(doc, "configuration")
    _unknown(doc, CONFIG_KEYS, "configuration")
    missing = sorted(REQUIRED_KEYS - set(doc))
    if missing:
        raise ValidationError(f"missing key(s): {', '.join(missing)}")
    if "temperature_K" not in doc:
        raise ValidationError("temperature_K is required (or pass --temperature)")
    temperature = _number(doc["temperature_K"], "temperature_K")
    if not math.isfinite(temperature) or temperature < 0:
        raise ValidationError(f"temperature_K must be finite and >= 0, got {temperature}")
    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict):
        raise ValidationError("tolerances must be an object")
    _unknown(tol_doc, TOLERANCE_KEYS, "tolerances")
    tolerances = Tolerances(**{k: _number(v, f"tolerances.{k}") for k, v in tol_doc.items()})
    try:
        mol = MolecularSystem(
            doc["omega_initial"],
            doc["omega_final"],
            doc["duschinsky"],
            doc["delta"],
            label=str(doc.get("label", "molecule")),
            strict=strict,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed molecule data: {exc}") from None
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ValidationError("seed must be an integer")
    return JobConfig(
        molecule=mol,
        temperature=temperature,
        truncation=parse_truncation(doc.get("truncation")),
        bin_width=_number(doc.get("bin_width_cm1", 10.0), "bin_width_cm1"),
        seed=seed,
        tolerances=tolerances,
    )


def apply_overrides(
    doc: dict,
    temperature=None,
    n_max=None,
    target_mass=None,
    bin_width=None,
    seed=None,
    tolerance=None,
) -> dict:
    """Return a copy of a config document with command-line overrides applied."""
    doc = dict(doc)
    if temperature is not None:
        doc["temperature_K"] = temperature
    if n_max is not None or target_mass is not None:
        trunc = dict(doc.get("truncation") or {})
        if n_max is not None:
            trunc["n_max"] = n_max
        if target_mass is not None:
            trunc["target_mass"] = target_mass
        doc["truncation"] = trunc
    if bin_width is not None:
        doc["bin_width_cm1"] = bin_width
    if seed is not None:
        doc["seed"] = seed
    if tolerance is not None:
        doc["tolerances"] = {"constraint": tolerance, "reconstruction": tolerance}
    return doc


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None


# ---------------------------------------------------------------------------
# circuit documents


def _complex_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def _complex_vector(v) -> list:
    return [[float(x.real), float(x.imag)] for x in np.asarray(v, dtype=complex).reshape(-1)]


def _to_complex(data, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValidationError(f"{name} must hold [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def circuit_to_json(circuit: CircuitSpec, config: JobConfig) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "circuit",
        "label": circuit.label,
        "temperature_K": circuit.temperature,
        "modes": circuit.modes,
        "system_modes": config.molecule.modes,
        "interferometer": _complex_matrix(circuit.interferometer),
        "squeezing": circuit.squeezing.tolist(),
        "squeezing_db": circuit.squeezing_db.tolist(),
        "input_amplitudes": _complex_vector(circuit.input_amplitudes),
        "job": config.to_json(),
    }
    dec = circuit.decomposition
    t = circuit.transform
    if dec is not None and t is not None:
        doc["audit"] = {
            "X": _complex_matrix(t.X),
            "Y": _complex_matrix(t.Y),
            "gamma": _complex_vector(dec.gamma),
            "gamma_prime": _complex_vector(dec.gamma_prime),
            "C_R": _complex_matrix(dec.C_R),
        }
    return doc


def circuit_from_json(doc: dict, strict: bool = True) -> tuple[CircuitSpec, JobConfig]:
    """Rebuild a circuit and the job it was compiled for."""
    check_schema(doc, "circuit")
    if doc.get("kind") != "circuit":
        raise ValidationError("not a circuit document")
    config = parse_config(doc["job"], strict=strict)
    if not math.isclose(float(doc["temperature_K"]), config.temperature, rel_tol=0, abs_tol=0):
        raise ValidationError("circuit temperature disagrees with its job section")
    decomposition = transform = None
    audit = doc.get("audit")
    if audit is not None:
        transform = BogoliubovTransform(
            _to_complex(audit["X"], "X"), _to_complex(audit["Y"], "Y"), _to_complex(audit["gamma"], "gamma")
        )
        decomposition = GaussianDecomposition(
            _to_complex(doc["interferometer"], "interferometer"),
            doc["squeezing"],
            _to_complex(audit["C_R"], "C_R"),
            _to_complex(audit["gamma"], "gamma"),
            _to_complex(audit["gamma_prime"], "gamma_prime"),
            _to_complex(doc["input_amplitudes"], "input_amplitudes"),
        )
    circuit = CircuitSpec(
        interferometer=_to_complex(doc["interferometer"], "interferometer"),
        squeezing=np.asarray(doc["squeezing"], dtype=float),
        input_amplitudes=_to_complex(doc["input_amplitudes"], "input_amplitudes"),
        temperature=float(doc["temperature_K"]),
        label=str(doc.get("label", config.molecule.label)),
        molecule=config.molecule,
        decomposition=decomposition,
        transform=transform,
    )
    return circuit, config


def with_job_overrides(config: JobConfig, **overrides) -> JobConfig:
    """Override truncation, binning, seed or tolerances of a parsed job.

    Temperature cannot change here because the circuit depends on it.
    """
    doc = apply_overrides(config.to_json(), **overrides)
    new = parse_config(doc, strict=False)
    return replace(new, molecule=config.molecule)


# ---------------------------------------------------------------------------
# CSV


def fmt(x) -> str:
    return "%.17g" % float(x)


def _pattern(row) -> str:
    return " ".join(str(int(v)) for v in row)


def _header(kind: str, meta: dict) -> list[str]:
    lines = [f"# schema_version={SCHEMA_VERSION}", f"# kind={kind}"]
    lines += [f"# {k}={v}" for k, v in meta.items()]
    return lines


def table_meta(table: TransitionTable, config: JobConfig) -> dict:
    return {
        "label": config.molecule.label,
        "temperature_K": fmt(config.temperature),
        "captured_mass": fmt(table.captured_mass),
        "n_max": table.n_max,
        "target_mass": fmt(table.truncation.target_mass),
    }


def sticks_csv(spectrum: Spectrum, table: TransitionTable, config: JobConfig) -> str:
    k = table.system_modes
    lines = _header("sticks", table_meta(table, config))
    lines.append("omega_v_cm1,probability,m_pattern,n_pattern")
    for w, p, i in zip(spectrum.stick_omega, spectrum.stick_probability, spectrum.stick_index):
        row = table.patterns[i]
        lines.append(f"{fmt(w)},{fmt(p)},{_pattern(row[:k])},{_pattern(row[k:])}")
    return "\n".join(lines) + "\n"


def histogram_csv(spectrum: Spectrum, table: TransitionTable, config: JobConfig) -> str:
    meta = table_meta(table, config)
    meta["bin_width_cm1"] = fmt(spectrum.bin_width)
    lines = _header("histogram", meta)
    lines.append("bin_center_cm1,intensity")
    lines += [f"{fmt(c)},{fmt(v)}" for c, v in zip(spectrum.centers, spectrum.intensities)]
    return "\n".join(lines) + "\n"


def samples_csv(samples: np.ndarray, table: TransitionTable, config: JobConfig, seed: int) -> str:
    k = table.system_modes
    meta = table_meta(table, config)
    meta["seed"] = seed
    meta["count"] = samples.shape[0]
    lines = _header("samples", meta)
    lines.append(",".join([f"m_{i}" for i in range(k)] + [f"n_{i}" for i in range(table.modes - k)]))
    lines += [",".join(str(int(v)) for v in row) for row in samples]
    return "\n".join(lines) + "\n"


def squeezing_csv(temperatures, squeezing: np.ndarray, db: np.ndarray, label: str) -> str:
    modes = squeezing.shape[1]
    lines = _header("squeezing_sweep", {"label": label})
    lines.append(
        ",".join(["temperature_K"] + [f"s_{i}" for i in range(modes)] + [f"db_{i}" for i in range(modes)])
    )
    for t, s, d in zip(temperatures, squeezing, db):
        lines.append(",".join([fmt(t)] + [fmt(x) for x in s] + [fmt(x) for x in d]))
    return "\n".join(lines) + "\n"


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a file written by this module into (metadata, columns, rows)."""
    meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh.read().split("\n"):
            if not line:
                continue
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = value
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    check_schema(meta, str(path))
    return meta, columns or [], rows


# ---------------------------------------------------------------------------
# atomic writes


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json_atomic(path, doc: dict) -> Path:
    return write_text_atomic(path, json.dumps(doc, indent=2) + "\n")
