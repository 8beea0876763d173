"""Declarative 1-D parameter sweeps over PROPI experiments.

An experiment file is a JSON document describing one protocol, one swept
parameter, a grid, a PROPI plan, a spin-system template and a list of bath
seeds. Frequencies in the file are ordinary frequencies (Hz), durations are
seconds and angles are degrees; everything is converted to angular units
internally.

Swept parameters and the unit of their grid values:

=================  ===========================================================
``Rabi``           lock Rabi frequency (Hz); per-tone amplitude for DQT
``LockDuration``   spin-lock duration (s)
``SweepRange``     ISE sweep range f_range (Hz)
``SweepRate``      ISE sweep rate v = df/dt (Hz/s)
``Amplitude``      DQT amplitude factor alpha
``Theta``          field misalignment (degrees)
``NPolarize``      number N of polarizing cycles
=================  ===========================================================
"""

from __future__ import annotations

import copy
import csv
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional, Union

import jsonschema
import numpy as np

from .analysis import analyze_trace
from .errors import ConfigurationError, NvPropiError
from .evolution import ResetModel, dump_state
from .hamiltonians import Transition, adiabaticity_factor, dqt_effective_rabi, dqt_hartmann_hahn_drive
from .lattice_bath import BathNucleus, PhysicalConstants, SpinSystem, sample_bath
from .protocols import DqtCycleParams, Direction, IseParams, NovelParams, PropiPlan, run_propi

TWO_PI = 2.0 * math.pi

PROTOCOLS = ("Novel", "Ise", "DqtNovel", "DqtIse")
PARAMETERS = ("Rabi", "LockDuration", "SweepRange", "SweepRate", "Amplitude", "Theta", "NPolarize")
CSV_COLUMNS = ("sweep_value", "mean_quanta", "stderr_quanta", "mean_offset", "flags")

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["protocol", "parameter", "grid"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "protocol": {"enum": list(PROTOCOLS)},
        "parameter": {"enum": list(PARAMETERS)},
        "grid": {
            "oneOf": [
                {"type": "array", "items": _NUMBER, "minItems": 1},
                {
                    "type": "object",
                    "required": ["min", "max", "points"],
                    "additionalProperties": False,
                    "properties": {
                        "min": _NUMBER,
                        "max": _NUMBER,
                        "points": {"type": "integer", "minimum": 1},
                        "spacing": {"enum": ["linear", "log"]},
                    },
                },
            ]
        },
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_polarize": {"type": "integer", "minimum": 0},
                "m_readout": {"type": "integer", "minimum": 2},
                "tail_points": {"type": "integer", "minimum": 1},
                "repetitions": {"type": "integer", "minimum": 1},
            },
        },
        "cycle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rabi_hz": {"type": ["number", "null"], "minimum": 0},
                "lock_duration_s": {"type": "number", "minimum": 0},
                "f_range_hz": {"type": "number", "minimum": 0},
                "duration_s": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "sweep_rate_hz_per_s": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "center_offset_hz": {"type": ["number", "null"]},
                "direction": {"enum": ["up", "down"]},
                "transition": {"enum": ["0-1", "0+1"]},
                "Delta_hz": _POSITIVE,
                "alpha": {"type": "number", "minimum": 0},
                "effective": {"type": "boolean"},
                "ideal_pulses": {"type": "boolean"},
            },
        },
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "field_T": {"type": "number", "minimum": 0},
                "theta_deg": {"type": "number", "minimum": 0, "maximum": 90},
                "radius_nm": {"type": "number", "exclusiveMinimum": 0, "maximum": 5},
                "min_coupling_hz": {"type": "number", "minimum": 0},
                "max_spins": {"type": "integer", "minimum": 0, "maximum": 10},
                "nuclei": {
                    "type": ["array", "null"],
                    "items": {
                        "type": "object",
                        "required": ["a_par_hz", "a_perp_hz"],
                        "additionalProperties": False,
                        "properties": {"a_par_hz": _NUMBER, "a_perp_hz": _NUMBER},
                    },
                },
            },
        },
        "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "imperfections": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p_charge": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "p_spin": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "jitter": {"type": "number", "minimum": 0, "maximum": 1},
                "ideal": {"type": "boolean"},
            },
        },
        "contrast": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "output_path": {"type": "string"},
    },
}

DEFAULTS = {
    "name": "sweep",
    "plan": {"n_polarize": 50, "m_readout": 200, "tail_points": 30, "repetitions": 2},
    "cycle": {
        "rabi_hz": None,
        "lock_duration_s": 10e-6,
        "f_range_hz": 10e6,
        "duration_s": None,
        "sweep_rate_hz_per_s": None,
        "center_offset_hz": None,
        "direction": "up",
        "transition": "0-1",
        "Delta_hz": 40e6,
        "alpha": 1.0,
        "effective": False,
        "ideal_pulses": False,
    },
    "system": {
        "field_T": 0.175,
        "theta_deg": 0.0,
        "radius_nm": 1.5,
        "min_coupling_hz": 2e3,
        "max_spins": 4,
        "nuclei": None,
    },
    "seeds": list(range(30)),
    "imperfections": {"p_charge": 0.70, "p_spin": 0.92, "jitter": 0.0, "ideal": False},
    "contrast": 0.3,
    "output_path": "sweep.csv",
}


class ConfigErrors(ConfigurationError):
    """A configuration failed validation; ``errors`` lists every problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SweepFailed(NvPropiError):
    """Every point of a sweep failed."""


@dataclass
class SweepConfig:
    """Normalized experiment description (see module docstring for units)."""

    protocol: str
    parameter: str
    grid: list
    plan: dict
    cycle: dict
    system: dict
    seeds: list
    imperfections: dict
    contrast: float = 0.3
    output_path: str = "sweep.csv"
    name: str = "sweep"

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        return cls(**normalize_config(doc))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "protocol": self.protocol,
            "parameter": self.parameter,
            "grid": list(self.grid),
            "plan": dict(self.plan),
            "cycle": dict(self.cycle),
            "system": copy.deepcopy(self.system),
            "seeds": list(self.seeds),
            "imperfections": dict(self.imperfections),
            "contrast": self.contrast,
            "output_path": self.output_path,
        }


@dataclass
class SweepRow:
    sweep_value: float
    mean_quanta: float
    stderr_quanta: float
    mean_offset: float
    flags: list = field(default_factory=list)


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list
    failures: list
    warnings: list
    wall_time: float


def _merge_defaults(doc: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _expand_grid(grid) -> list:
    if isinstance(grid, list):
        return [float(x) for x in grid]
    n = grid["points"]
    if grid.get("spacing") == "log":
        return [float(x) for x in np.geomspace(grid["min"], grid["max"], n)]
    return [float(x) for x in np.linspace(grid["min"], grid["max"], n)]


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def _schema_errors(doc: dict) -> list:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        if err.validator == "required":
            missing = err.message.split("'")[1] if "'" in err.message else err.message
            errors.append(f"{_pointer(list(err.absolute_path) + [missing])}: required field missing")
        else:
            errors.append(f"{_pointer(err.absolute_path)}: {err.message}")
    return errors


def normalize_config(doc: dict) -> dict:
    """Schema-validate ``doc``, fill defaults and check cross-field rules.

    Raises:
        ConfigErrors: listing every violation, each prefixed with the JSON
            pointer of the offending field.
    """
    errors = _schema_errors(doc)
    if errors:
        raise ConfigErrors(errors)
    cfg = _merge_defaults(doc)
    cfg["grid"] = _expand_grid(cfg["grid"])
    errors = _semantic_errors(cfg)
    if errors:
        raise ConfigErrors(errors)
    return cfg


def _semantic_errors(cfg: dict) -> list:
    errors = []
    grid, proto, param = cfg["grid"], cfg["protocol"], cfg["parameter"]
    diffs = np.diff(grid)
    if len(grid) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        errors.append("/grid: grid must be strictly monotonic")
    is_dqt = proto.startswith("Dqt")
    is_ise = proto.endswith("Ise")
    if param == "Amplitude" and not is_dqt:
        errors.append("/parameter: Amplitude (alpha) applies to DQT protocols only")
    if param in ("SweepRange", "SweepRate") and not is_ise:
        errors.append(f"/parameter: {param} applies to ISE protocols only")
    if param == "LockDuration" and is_ise:
        errors.append("/parameter: LockDuration applies to NOVEL protocols only")
    if param == "NPolarize" and any(g < 0 or g != int(g) for g in grid):
        errors.append("/grid: NPolarize values must be non-negative integers")
    if param == "Theta" and any(not 0 <= g <= 90 for g in grid):
        errors.append("/grid: Theta values must lie in [0, 90] degrees")
    if param in ("Rabi", "LockDuration", "SweepRange", "SweepRate", "Amplitude") and any(g < 0 for g in grid):
        errors.append(f"/grid: {param} values must be non-negative")
    if param == "SweepRate" and any(g == 0 for g in grid):
        errors.append("/grid: zero sweep rate")
    cyc = cfg["cycle"]
    if is_ise and param != "SweepRate" and cyc["duration_s"] is None and cyc["sweep_rate_hz_per_s"] is None:
        errors.append("/cycle/duration_s: ISE needs duration_s or sweep_rate_hz_per_s")
    if cyc["duration_s"] is not None and cyc["sweep_rate_hz_per_s"] is not None:
        errors.append("/cycle/sweep_rate_hz_per_s: give either duration_s or sweep_rate_hz_per_s, not both")
    plan = cfg["plan"]
    if not plan["tail_points"] < plan["m_readout"]:
        errors.append("/plan/tail_points: tail_points must be smaller than m_readout")
    n_nuc = len(cfg["system"]["nuclei"]) if cfg["system"]["nuclei"] is not None else cfg["system"]["max_spins"]
    if n_nuc > 10:
        errors.append("/system: more than 10 nuclei exceeds the Hilbert-space cap")
    if is_dqt:
        for k, g in enumerate(grid):
            point = _point_values(cfg, g)
            amp = math.sqrt(point["alpha"]) * point["rabi_hz"]
            if cyc["Delta_hz"] <= amp:
                errors.append(
                    f"/cycle/Delta_hz: Delta ({cyc['Delta_hz']:.6g} Hz) must exceed the drive amplitude "
                    f"({amp:.6g} Hz at grid point {k}); adiabatic elimination of |0> is invalid otherwise")
                break
    return errors


def _point_values(cfg: dict, value: float) -> dict:
    """Resolved per-point cycle quantities (Hz, s, degrees)."""
    cyc, sysd = cfg["cycle"], cfg["system"]
    field_T = sysd["field_T"]
    larmor_hz = PhysicalConstants().gammaC * field_T / TWO_PI
    p = {
        "rabi_hz": cyc["rabi_hz"],
        "lock_duration_s": cyc["lock_duration_s"],
        "f_range_hz": cyc["f_range_hz"],
        "alpha": cyc["alpha"],
        "theta_deg": sysd["theta_deg"],
        "n_polarize": cfg["plan"]["n_polarize"],
        "sweep_rate_hz_per_s": cyc["sweep_rate_hz_per_s"],
        "duration_s": cyc["duration_s"],
    }
    param = cfg["parameter"]
    key = {"Rabi": "rabi_hz", "LockDuration": "lock_duration_s", "SweepRange": "f_range_hz",
           "Amplitude": "alpha", "Theta": "theta_deg", "NPolarize": "n_polarize",
           "SweepRate": "sweep_rate_hz_per_s"}[param]
    p[key] = int(value) if param == "NPolarize" else value
    if param == "SweepRate":
        p["duration_s"] = None
    if p["rabi_hz"] is None:
        # default drive: Hartmann-Hahn match of the chosen protocol
        if cfg["protocol"].startswith("Dqt"):
            drive = dqt_hartmann_hahn_drive(TWO_PI * larmor_hz, TWO_PI * cyc["Delta_hz"], p["alpha"]) \
                if p["alpha"] > 0 else 0.0
            p["rabi_hz"] = drive / TWO_PI
        else:
            p["rabi_hz"] = larmor_hz
    if cfg["protocol"].endswith("Ise"):
        if p["duration_s"] is None:
            rate = p["sweep_rate_hz_per_s"]
            p["duration_s"] = p["f_range_hz"] / rate if rate else None
        else:
            p["sweep_rate_hz_per_s"] = p["f_range_hz"] / p["duration_s"]
    return p


def derived_quantities(cfg: dict) -> list:
    """Per-grid-point derived quantities echoed by validation (all in Hz)."""
    out = []
    larmor_hz = PhysicalConstants().gammaC * cfg["system"]["field_T"] / TWO_PI
    is_dqt = cfg["protocol"].startswith("Dqt")
    for g in cfg["grid"]:
        p = _point_values(cfg, g)
        entry = {"sweep_value": g, "rabi_hz": p["rabi_hz"]}
        drive_hz = p["rabi_hz"]
        if is_dqt:
            drive_hz = dqt_effective_rabi(TWO_PI * p["rabi_hz"], TWO_PI * cfg["cycle"]["Delta_hz"], p["alpha"]) / TWO_PI
            entry["omega_eff_hz"] = drive_hz
        entry["hh_mismatch_hz"] = drive_hz - larmor_hz
        if cfg["protocol"].endswith("Ise"):
            v = p["sweep_rate_hz_per_s"]
            entry["sweep_rate_hz_per_s"] = v
            entry["duration_s"] = p["duration_s"]
            entry["adiabaticity_factor"] = adiabaticity_factor(TWO_PI * drive_hz, v) if v else None
        out.append(entry)
    return out


def validate_config(path: Union[str, Path]) -> dict:
    """Load, validate and normalize an experiment file without running physics.

    Returns:
        ``{"config": normalized config, "derived": per-point derived values}``.

    Raises:
        ConfigErrors: on any schema or consistency violation.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigErrors([f"/: file not found: {path}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigErrors([f"/: invalid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigErrors(["/: top level must be an object"])
    cfg = normalize_config(doc)
    return {"config": cfg, "derived": derived_quantities(cfg)}


def build_system(cfg: dict, seed: int, theta_deg: Optional[float] = None) -> SpinSystem:
    sysd = cfg["system"]
    if sysd["nuclei"] is not None:
        nuclei = [BathNucleus(a_par=TWO_PI * n["a_par_hz"], a_perp=TWO_PI * n["a_perp_hz"]) for n in sysd["nuclei"]]
    else:
        nuclei = sample_bath(seed, radius=sysd["radius_nm"] * 1e-9,
                             min_coupling=TWO_PI * sysd["min_coupling_hz"], max_spins=sysd["max_spins"])
    theta = sysd["theta_deg"] if theta_deg is None else theta_deg
    return SpinSystem(field_magnitude=sysd["field_T"], theta=math.radians(theta), nuclei=tuple(nuclei))


def build_point(cfg: dict, value: float, seed: int):
    """(system, plan) for one grid point and bath seed."""
    p = _point_values(cfg, value)
    system = build_system(cfg, seed, p["theta_deg"])
    cyc = cfg["cycle"]
    direction = Direction.UP if cyc["direction"] == "up" else Direction.DOWN
    transition = Transition(cyc["transition"])
    rabi = TWO_PI * p["rabi_hz"]
    proto = cfg["protocol"]
    if proto.endswith("Novel"):
        base = NovelParams(rabi=rabi, lock_duration=p["lock_duration_s"], direction=direction,
                           transition=transition, ideal_pulses=cyc["ideal_pulses"])
    else:
        base = IseParams(f_range=p["f_range_hz"], duration=p["duration_s"], rabi=rabi,
                         center_offset=cyc["center_offset_hz"], direction=direction,
                         transition=transition, ideal_pulses=cyc["ideal_pulses"])
    cycle = base
    if proto.startswith("Dqt"):
        cycle = DqtCycleParams(base, Delta=TWO_PI * cyc["Delta_hz"], alpha=p["alpha"], effective=cyc["effective"])
    plan = PropiPlan(p["n_polarize"], cfg["plan"]["m_readout"], cycle,
                     tail_points=cfg["plan"]["tail_points"], repetitions=cfg["plan"]["repetitions"])
    return system, plan


def aggregate(values) -> tuple:
    """Mean and standard error of the mean (0 for a single value)."""
    q = np.asarray(values, dtype=float)
    stderr = float(q.std(ddof=1) / math.sqrt(len(q))) if len(q) > 1 else 0.0
    return float(q.mean()), stderr


def _run_task(cfg: dict, point_index: int, seed_index: int, dump_dir: Optional[str]):
    value = cfg["grid"][point_index]
    seed = cfg["seeds"][seed_index]
    try:
        system, plan = build_point(cfg, value, seed)
        imp = cfg["imperfections"]
        ideal = imp["ideal"]
        reset = ResetModel.ideal() if ideal else ResetModel(imp["p_charge"], imp["p_spin"])
        rec = run_propi(system, plan, reset, ideal=ideal, contrast=cfg["contrast"],
                        jitter=0.0 if ideal else imp["jitter"], seed=[seed, point_index])
        res = analyze_trace(rec.m_trace, plan.tail_points, reset)
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            dump_state(rec.final_state, Path(dump_dir) / f"point{point_index:04d}_seed{seed}.c16")
        return {"ok": True, "quanta": res.corrected_quanta, "offset": res.offset,
                "flags": list(res.flags), "warnings": list(rec.warnings)}
    except (NvPropiError, ValueError, np.linalg.LinAlgError) as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def _run_task_packed(args):
    return _run_task(*args)


def run_sweep(config: SweepConfig, threads: int = 1, dump_dir: Optional[str] = None) -> SweepResult:
    """Run every grid point for every seed and aggregate per point.

    Tasks are independent and may run in a process pool; results are merged
    by (point, seed) index so the output does not depend on scheduling.

    Raises:
        SweepFailed: if every task failed.
    """
    cfg = config.to_dict()
    t0 = time.perf_counter()
    tasks = [(cfg, i, j, dump_dir) for i in range(len(cfg["grid"])) for j in range(len(cfg["seeds"]))]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task_packed, tasks))
    else:
        results = [_run_task(*t) for t in tasks]

    n_seeds = len(cfg["seeds"])
    rows, failures, warnings = [], [], set()
    for i, value in enumerate(cfg["grid"]):
        chunk = results[i * n_seeds:(i + 1) * n_seeds]
        good = [r for r in chunk if r["ok"]]
        flags = set()
        for j, r in enumerate(chunk):
            if not r["ok"]:
                failures.append({"point_index": i, "sweep_value": value, "seed": cfg["seeds"][j], "error": r["error"]})
            else:
                flags.update(r["flags"])
                warnings.update(r["warnings"])
        if len(good) < len(chunk):
            flags.add(f"failed:{len(chunk) - len(good)}")
        if good:
            mean, stderr = aggregate([r["quanta"] for r in good])
            rows.append(SweepRow(value, mean, stderr, float(np.mean([r["offset"] for r in good])), sorted(flags)))
        else:
            rows.append(SweepRow(value, math.nan, math.nan, math.nan, sorted(flags)))
    if failures and len(failures) == len(tasks):
        raise SweepFailed(f"all {len(tasks)} sweep tasks failed; first error: {failures[0]['error']}")
    return SweepResult(config, rows, failures, sorted(warnings), time.perf_counter() - t0)


def write_csv(result: SweepResult, path: Union[str, Path]) -> None:
    """Write the sweep table; floats use ``repr`` so reruns are bit-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in result.rows:
            w.writerow([repr(row.sweep_value), repr(row.mean_quanta), repr(row.stderr_quanta),
                        repr(row.mean_offset), ";".join(row.flags)])


def _code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(result: SweepResult, path: Union[str, Path], extra: Optional[dict] = None) -> None:
    manifest = {
        "config": result.config.to_dict(),
        "derived": derived_quantities(result.config.to_dict()),
        "code_version": _code_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": result.wall_time,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "failures": result.failures,
        "warnings": result.warnings,
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2))
