"""Run configuration: TOML parsing, aggregated validation and a canonical echo writer."""
import dataclasses
import difflib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, get_type_hints

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .oscillator import OSCILLATOR_PRESETS
from .qubit import INITIAL_STATES, PRESETS

SCHEDULE_KINDS = ("ramp", "hold", "piecewise")
FIBRE_KINDS = ("qubit", "oscillator")
OUTPUT_FORMATS = ("snapshots", "summary", "config_echo", "run_meta")


@dataclass(frozen=True)
class SheetConfig:
    n_nodes: int = 101
    sheet_length: float = 1.0
    bending_stiffness: float = 1.0
    axial_stiffness: float = 10000.0


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "ramp"
    T: float = 10.0
    dt: float = 0.01
    d_final: float = 0.8
    snapshot_stride: int = 10
    points: Tuple[Tuple[float, float], ...] = ()


@dataclass(frozen=True)
class FibreConfig:
    kind: str = "qubit"
    preset: str = "paper-example"
    mu: float = 1.0
    coupling_length: float = 1.0
    gain: float = 1.0
    initial_state: str = "up"
    N_f: int = 20
    drive: float = 0.0
    truncation_threshold: float = 1e-08


@dataclass(frozen=True)
class CouplingConfig:
    beta: float = 0.0
    law: str = "multiplicative-quadratic"
    fp_enabled: bool = False
    fp_tol: float = 1e-10
    max_inner: int = 20
    antihermitian_rtol: float = 0.01


@dataclass(frozen=True)
class NumericsConfig:
    newton_tol: float = 1e-10
    max_newton: int = 50
    seed_amplitude: float = 0.01
    branch_sign: int = 1


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: Tuple[str, ...] = OUTPUT_FORMATS


@dataclass(frozen=True)
class SimConfig:
    sheet: SheetConfig = field(default_factory=SheetConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    fibre: FibreConfig = field(default_factory=FibreConfig)
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, dotted_key, value):
        """Copy with one ``section.key`` changed (value already typed)."""
        section, key = dotted_key.split(".", 1)
        sub = dataclasses.replace(getattr(self, section), **{key: value})
        return dataclasses.replace(self, **{section: sub})


SECTION_TYPES = get_type_hints(SimConfig)


def _section_schema(section):
    cls = SECTION_TYPES[section]
    hints = get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def all_keys():
    return [f"{s}.{k}" for s in SECTION_TYPES for k in _section_schema(s)]


def _suggest(section, key):
    candidates = list(_section_schema(section)) if section in SECTION_TYPES else list(SECTION_TYPES)
    match = difflib.get_close_matches(key, candidates, n=1, cutoff=0.5)
    if match and section in SECTION_TYPES:
        return f"; did you mean '{section}.{match[0]}'?"
    if not match and section in SECTION_TYPES:
        dotted = difflib.get_close_matches(key, [k.split(".")[1] for k in all_keys()], n=1, cutoff=0.5)
        if dotted:
            full = [k for k in all_keys() if k.endswith("." + dotted[0])][0]
            return f"; did you mean '{full}'?"
    return f"; did you mean '{match[0]}'?" if match else ""


def _coerce(value, typ, where, errors):
    """Convert a TOML value to the schema type, appending to ``errors`` on mismatch."""
    if typ is bool:
        if isinstance(value, bool):
            return value
    elif typ is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif typ is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif typ is str:
        if isinstance(value, str):
            return value
    elif typ == Tuple[str, ...]:
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return tuple(value)
    elif typ == Tuple[Tuple[float, float], ...]:
        if isinstance(value, list) and all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
            for p in value
        ):
            return tuple((float(a), float(b)) for a, b in value)
    errors.append(f"{where}: expected {_type_name(typ)}, got {value!r}")
    return None


def _type_name(typ):
    return {bool: "boolean", int: "integer", float: "number", str: "string"}.get(typ, "array")


def from_mapping(data) -> SimConfig:
    """Build and validate a config from a parsed mapping; all problems are aggregated."""
    errors = []
    sections = {}
    for section, body in data.items():
        if section not in SECTION_TYPES:
            errors.append(f"unknown section [{section}]{_suggest(None, section)}")
            continue
        if not isinstance(body, dict):
            errors.append(f"[{section}] must be a table")
            continue
        schema = _section_schema(section)
        values = {}
        for key, value in body.items():
            if key not in schema:
                errors.append(f"unknown key '{section}.{key}'{_suggest(section, key)}")
                continue
            coerced = _coerce(value, schema[key], f"{section}.{key}", errors)
            if coerced is not None:
                values[key] = coerced
        sections[section] = values
    # range checks run on whatever parsed cleanly so one pass reports everything
    cfg = SimConfig(**{s: SECTION_TYPES[s](**v) for s, v in sections.items()})
    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def validate(cfg: SimConfig):
    """Return the list of every range/consistency violation in ``cfg``."""
    e = []
    sh, sc, fb, cp, nm, out = cfg.sheet, cfg.schedule, cfg.fibre, cfg.coupling, cfg.numerics, cfg.output

    def positive(name, v):
        if not (math.isfinite(v) and v > 0):
            e.append(f"{name} must be positive and finite, got {v!r}")

    if sh.n_nodes < 5 or sh.n_nodes % 2 == 0:
        e.append(f"sheet.n_nodes must be an odd integer >= 5, got {sh.n_nodes}")
    positive("sheet.sheet_length", sh.sheet_length)
    positive("sheet.bending_stiffness", sh.bending_stiffness)
    positive("sheet.axial_stiffness", sh.axial_stiffness)

    if sc.kind not in SCHEDULE_KINDS:
        e.append(f"schedule.kind must be one of {list(SCHEDULE_KINDS)}, got {sc.kind!r}")
    positive("schedule.T", sc.T)
    positive("schedule.dt", sc.dt)
    if sc.dt > 0 and sc.T > 0:
        if sc.dt > sc.T:
            e.append(f"schedule.dt ({sc.dt!r}) must not exceed schedule.T ({sc.T!r})")
        else:
            n = round(sc.T / sc.dt)
            if abs(n * sc.dt - sc.T) > 1e-9 * sc.T:
                e.append(f"schedule.T ({sc.T!r}) must be an integer multiple of schedule.dt ({sc.dt!r})")
    if sc.snapshot_stride < 0:
        e.append("schedule.snapshot_stride must be >= 0 (0 disables snapshots)")
    ell = sh.sheet_length
    # distances are only checked against a usable length, to avoid cascades
    ell_ok = math.isfinite(ell) and ell > 0
    if ell_ok and sc.kind in ("ramp", "hold") and not (0 < sc.d_final <= ell):
        e.append(f"schedule.d_final must lie in (0, sheet.sheet_length], got {sc.d_final!r}")
    if sc.kind == "piecewise":
        pts = sc.points
        if len(pts) < 2:
            e.append("schedule.points needs at least two [t, d] pairs for kind 'piecewise'")
        else:
            ts = [p[0] for p in pts]
            if ts[0] != 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
                e.append("schedule.points times must start at 0 and strictly increase")
            if ts[-1] < sc.T:
                e.append("schedule.points must cover [0, schedule.T]")
            if ell_ok and any(not (0 < p[1] <= ell) for p in pts):
                e.append("schedule.points distances must lie in (0, sheet.sheet_length]")

    if fb.kind not in FIBRE_KINDS:
        e.append(f"fibre.kind must be one of {list(FIBRE_KINDS)}, got {fb.kind!r}")
    elif fb.kind == "qubit":
        if fb.preset not in PRESETS:
            e.append(f"fibre.preset {fb.preset!r} unknown for qubit; choose from {sorted(PRESETS)}")
        if fb.initial_state not in INITIAL_STATES:
            e.append(f"fibre.initial_state {fb.initial_state!r} unknown; choose from {sorted(INITIAL_STATES)}")
    else:
        if fb.preset not in OSCILLATOR_PRESETS:
            e.append(f"fibre.preset {fb.preset!r} unknown for oscillator; choose from {list(OSCILLATOR_PRESETS)}")
        if _fock_level(fb.initial_state) is None:
            e.append("fibre.initial_state for oscillators must be 'ground' or 'fock:<n>'")
        elif _fock_level(fb.initial_state) >= fb.N_f - 2:
            e.append("fibre.initial_state level must lie below fibre.N_f - 2")
        if fb.N_f < 4:
            e.append(f"fibre.N_f must be >= 4, got {fb.N_f}")
        positive("fibre.truncation_threshold", fb.truncation_threshold)
    positive("fibre.mu", fb.mu)
    if not (math.isfinite(fb.coupling_length) and fb.coupling_length >= 0):
        e.append("fibre.coupling_length must be >= 0")
    if not math.isfinite(fb.gain):
        e.append("fibre.gain must be finite")
    if not math.isfinite(fb.drive):
        e.append("fibre.drive must be finite")

    if not (math.isfinite(cp.beta) and cp.beta >= 0):
        e.append(f"coupling.beta must be >= 0, got {cp.beta!r}")
    if cp.law != "multiplicative-quadratic":
        e.append(f"coupling.law must be 'multiplicative-quadratic', got {cp.law!r}")
    positive("coupling.fp_tol", cp.fp_tol)
    if cp.max_inner < 1:
        e.append("coupling.max_inner must be >= 1")
    positive("coupling.antihermitian_rtol", cp.antihermitian_rtol)

    positive("numerics.newton_tol", nm.newton_tol)
    if nm.max_newton < 1:
        e.append("numerics.max_newton must be >= 1")
    positive("numerics.seed_amplitude", nm.seed_amplitude)
    if nm.branch_sign not in (1, -1):
        e.append(f"numerics.branch_sign must be +1 or -1, got {nm.branch_sign}")

    if not out.directory:
        e.append("output.directory must be non-empty")
    for f in out.formats:
        if f not in OUTPUT_FORMATS:
            e.append(f"output.formats entry {f!r} unknown; choose from {list(OUTPUT_FORMATS)}")
    return e


def _fock_level(state):
    if state == "ground":
        return 0
    if state.startswith("fock:") and state[5:].isdigit():
        return int(state[5:])
    return None


def fock_level(state):
    level = _fock_level(state)
    if level is None:
        raise ConfigError(f"bad oscillator initial state {state!r}")
    return level


def parse_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def parse_config_text(text, source="<string>") -> SimConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigError(f"{source}: syntax error: {exc}") from None
    return from_mapping(data)


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, tuple):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    raise TypeError(f"cannot format {v!r}")


def echo_config(cfg: SimConfig) -> str:
    """Canonical TOML text for ``cfg``; parse(echo(cfg)) == cfg."""
    lines = []
    for section in SECTION_TYPES:
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        sub = getattr(cfg, section)
        for f in dataclasses.fields(sub):
            lines.append(f"{f.name} = {_format_value(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


def parse_value(dotted_key, text):
    """Parse a command-line value for ``section.key`` into the schema type."""
    if dotted_key not in all_keys():
        section, _, key = dotted_key.partition(".")
        raise ConfigError(f"unknown key '{dotted_key}'{_suggest(section, key)}")
    section, key = dotted_key.split(".", 1)
    typ = _section_schema(section)[key]
    try:
        value = tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        value = text
    errors = []
    out = _coerce(value, typ, dotted_key, errors)
    if errors:
        raise ConfigError(errors)
    return out


def default_config() -> SimConfig:
    return SimConfig()
