"""Run configuration: a TOML subset parsed into a fully resolved ``RunConfig``.

Example::

    scenario = "trapezoid_2d"
    knudsen = 0.05
    nx = 48
    ny = 24
    nv = [24, 16, 8]
    outputs = ["moments-csv"]

    [wall.top]
    kind = "diffuse"
    Tw = 1.05
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import tomli

from .boundary_ilw import Absorbing, Maxwell
from .errors import ParseError, ValidationError
from .scenarios import ALIASES, DEFAULTS, resolve_parameters

OUTPUT_FORMATS = ("moments-csv", "field-vtk")
WALL_KINDS = ("diffuse", "specular", "maxwell", "absorbing")
RUN_KEYS = ("scenario", "output_dir", "cadence", "outputs", "wall")

# the walls each scenario exposes to configuration
WALL_LABELS = {
    "smooth_1d": ("left", "right"),
    "temp_gradient_1d": ("left", "right"),
    "trapezoid_2d": ("bottom", "right", "top"),
    "airfoil_2d": ("right", "bottom", "airfoil", "closure"),
}


@dataclass
class RunConfig:
    scenario: str
    params: dict
    output_dir: str = "output"
    cadence: int | None = None  # None writes only the final state
    outputs: tuple[str, ...] = ("moments-csv",)
    walls: dict = field(default_factory=dict)

    def overrides(self) -> dict:
        """Overrides for ``build_scenario`` including the configured walls as wall specs."""
        out = {k: v for k, v in self.params.items() if k != "walls"}
        if self.walls:
            out["walls"] = {label: wall_spec(w) for label, w in self.walls.items()}
        return out


def wall_spec(w: dict):
    kind = w["kind"]
    if kind == "absorbing":
        return Absorbing()
    if kind == "specular":
        return Maxwell(0.0, w.get("Tw", 1.0))
    if kind == "diffuse":
        return Maxwell(1.0, w["Tw"])
    return Maxwell(w["alpha"], w["Tw"])


_LOC = re.compile(r"\(at line (\d+), column (\d+)\)")


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LOC.search(str(exc))
        if m:
            line, col = int(m.group(1)), int(m.group(2))
        else:  # "(at end of document)"
            rows = text.split("\n")
            line, col = len(rows), len(rows[-1]) + 1
        msg = re.sub(r"\s*\(at [^)]*\)", "", str(exc)).strip()
        raise ParseError(msg, line, col) from None
    return validate(raw)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _number(key, val, lo=None, lo_open=True, hi=None, hi_open=True, integer=False):
    kinds = (int,) if integer else (int, float)
    if isinstance(val, bool) or not isinstance(val, kinds):
        raise ValidationError(f"{key} must be {'an integer' if integer else 'a number'}", key)
    if not math.isfinite(val):
        raise ValidationError(f"{key} must be finite", key)
    if lo is not None and (val <= lo if lo_open else val < lo):
        raise ValidationError(f"{key} must be {'>' if lo_open else '>='} {lo:g}", key)
    if hi is not None and (val >= hi if hi_open else val > hi):
        raise ValidationError(f"{key} must be {'<' if hi_open else '<='} {hi:g}", key)
    return val if integer else float(val)


def _per_axis(key, val, integer):
    if isinstance(val, list):
        if len(val) != 3:
            raise ValidationError(f"{key} must be a number or a list of 3", key)
        return [_number(f"{key}[{i}]", v, 0, integer=integer) for i, v in enumerate(val)]
    return _number(key, val, 0, integer=integer)


def _param(key, val):
    if key == "epsilon":
        return _number(key, val, 0)
    if key == "nu":
        return _number(key, val, -0.5, False, 1.0)
    if key == "tau_prefactor":
        return _number(key, val, 0, False)
    if key == "tau_omega":
        return _number(key, val)
    if key in ("nx", "ny"):
        return _number(key, val, 4, integer=True)
    if key == "nv":
        return _per_axis(key, val, True)
    if key == "vmax":
        return _per_axis(key, val, False)
    if key in ("dt", "cfl", "mach_in"):
        return _number(key, val, 0)
    if key == "t_end":
        return _number(key, val, 0, False)
    raise ValidationError(f"unknown key {key!r}", key)


def _wall(scenario, label, table):
    key = f"wall.{label}"
    if label not in WALL_LABELS[scenario]:
        raise ValidationError(f"{key}: scenario {scenario!r} has no configurable wall {label!r}", key)
    if not isinstance(table, dict):
        raise ValidationError(f"{key} must be a table", key)
    extra = set(table) - {"kind", "alpha", "Tw"}
    if extra:
        raise ValidationError(f"unknown key {key}.{sorted(extra)[0]}", f"{key}.{sorted(extra)[0]}")
    kind = table.get("kind", "diffuse")
    if kind not in WALL_KINDS:
        raise ValidationError(f"{key}.kind must be one of {', '.join(WALL_KINDS)}", f"{key}.kind")
    out = {"kind": kind}
    if kind == "maxwell":
        out["alpha"] = _number(f"{key}.alpha", table.get("alpha", 1.0), 0, False, 1, False)
    elif "alpha" in table:
        raise ValidationError(f"{key}.alpha only applies to kind = \"maxwell\"", f"{key}.alpha")
    if kind != "absorbing":
        out["Tw"] = _number(f"{key}.Tw", table.get("Tw", 1.0), 0)
    elif "Tw" in table:
        raise ValidationError(f"{key}.Tw does not apply to an absorbing wall", f"{key}.Tw")
    return out


def validate(raw: dict) -> RunConfig:
    """Resolve a parsed mapping into a ``RunConfig``; every key is checked."""
    if "scenario" not in raw:
        raise ValidationError("scenario is required", "scenario")
    name = raw["scenario"]
    if name not in DEFAULTS:
        raise ValidationError(f"scenario must be one of {', '.join(DEFAULTS)}", "scenario")
    overrides, walls = {}, {}
    for key, val in raw.items():
        if key == "scenario":
            continue
        if key == "wall":
            if not isinstance(val, dict):
                raise ValidationError("wall must be a table of wall tables", "wall")
            walls = {label: _wall(name, label, t) for label, t in val.items()}
            continue
        if key in RUN_KEYS:
            continue
        canon = ALIASES.get(key, key)
        if canon in overrides:
            raise ValidationError(f"{key} given twice (also as an alias)", key)
        if canon == "walls" or canon not in DEFAULTS[name]:
            raise ValidationError(f"unknown key {key!r} for scenario {name!r}", key)
        overrides[canon] = _param(canon, val)
    if name in ("smooth_1d", "temp_gradient_1d"):
        for key in ("nv", "vmax"):
            if isinstance(overrides.get(key), list):
                raise ValidationError(f"{key} must be a single number for a 1D scenario", key)
    params = resolve_parameters(name, overrides)
    params.pop("walls")
    for key in ("nv", "vmax"):
        if isinstance(params[key], tuple):
            params[key] = list(params[key])

    output_dir = raw.get("output_dir", "output")
    if not isinstance(output_dir, str) or not output_dir:
        raise ValidationError("output_dir must be a non-empty string", "output_dir")
    cadence = raw.get("cadence")
    if cadence is not None:
        cadence = _number("cadence", cadence, 1, False, integer=True)
    outputs = raw.get("outputs", ["moments-csv"])
    if not isinstance(outputs, list) or any(o not in OUTPUT_FORMATS for o in outputs):
        raise ValidationError(f"outputs must be a list drawn from {', '.join(OUTPUT_FORMATS)}", "outputs")
    return RunConfig(name, params, output_dir, cadence, tuple(dict.fromkeys(outputs)), walls)


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def dump_config(cfg: RunConfig) -> str:
    """TOML text that parses back to an equal ``RunConfig``."""
    lines = [f"scenario = {_toml_value(cfg.scenario)}"]
    for key, val in cfg.params.items():
        if val is not None:
            lines.append(f"{key} = {_toml_value(val)}")
    lines.append(f"output_dir = {_toml_value(cfg.output_dir)}")
    if cfg.cadence is not None:
        lines.append(f"cadence = {cfg.cadence}")
    lines.append(f"outputs = {_toml_value(list(cfg.outputs))}")
    for label, w in cfg.walls.items():
        lines.append("")
        lines.append(f"[wall.{label}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in w.items())
    return "\n".join(lines) + "\n"
