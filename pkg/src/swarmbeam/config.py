"""Scenario configuration: YAML parsing, defaults, validation.

A scenario file is nested sections of key-value pairs.  Unknown keys are
rejected with a nearest-key suggestion; missing required keys report their
section path; type mismatches report the expected unit.  Every default the
parser applies is recorded so runners can echo it into output metadata.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from typing import Any

import yaml

from .beamforming import ELEMENT_MODELS, AngularGrid, TaperSpec
from .errors import ConfigurationError
from .geometry import GEOMETRY_KINDS, GeometrySpec
from .linkbudget import LinkBudgetParams
from .perturbation import PerturbationSpec

# schema: section -> key -> (type, unit/comment, default or REQUIRED)
_REQUIRED = object()

SCHEMA: dict[str, dict[str, tuple]] = {
    "geometry": {
        "kind": (str, f"one of {', '.join(GEOMETRY_KINDS)}", _REQUIRED),
        "n_platforms": (int, "count", _REQUIRED),
        "radiators_per_platform": (int, "count", 1),
        "frequency_hz": (float, "hertz", 2.0e9),
        "spacing_m": (float, "meters (lattice pitch; default lambda/2)", None),
        "radial_scale_m": (float, "meters (spiral scale; default min_spacing_m)", None),
        "n_arms": (int, "count (elsa)", 5),
        "growth_rate": (float, "per radian (elsa)", 0.05),
        "min_spacing_m": (float, "meters (default lambda/2)", None),
        "grid_shape": (list, "[nx, ny] explicit platform grid", None),
    },
    "beams": {
        "u": (float, "direction cosine", 0.0),
        "v": (float, "direction cosine", 0.0),
        "taper": (str, "uniform | radial-hann | radial-hamming | radial-taylor-approx",
                  "uniform"),
        "taper_beta": (float, "radial-taylor-approx shape parameter", 3.0),
    },
    "grid": {
        "n_u": (int, "samples", 1024),
        "n_v": (int, "samples", 1024),
        "u_min": (float, "direction cosine", -1.0),
        "u_max": (float, "direction cosine", 1.0),
        "v_min": (float, "direction cosine", -1.0),
        "v_max": (float, "direction cosine", 1.0),
    },
    "element": {
        "model": (str, f"one of {', '.join(ELEMENT_MODELS)}", "isotropic"),
        "cosine_q": (float, "cosine exponent", 1.0),
    },
    "analysis": {
        "altitude_m": (float, "meters", 500.0e3),
        "mask_factor": (float, "main-lobe mask semi-axis in HPBW units", 1.5),
        "gl_threshold_db": (float, "dB relative to peak", -10.0),
    },
    "link": {
        "per_element_power_w": (float, "watts", 1.0),
        "element_gain_dbi": (float, "dBi", 5.0),
        "ue_gain_dbi": (float, "dBi", 0.0),
        "misc_losses_db": (float, "dB", 3.0),
        "ue_sensitivity_dbm": (float, "dBm", -100.0),
        "slant_distance_m": (float, "meters (default altitude_m)", None),
    },
    "perturbation": {
        "sigma_pos_m": (float, "meters", 0.0),
        "sigma_phase_rad": (float, "radians", 0.0),
        "failure_prob": (float, "probability", 0.0),
        "trials": (int, "count", 1000),
        "master_seed": (int, "uint64", 0),
        "window_halfwidth": (float, "direction cosines (default 5x estimated HPBW)",
                             None),
        "window_n": (int, "samples per axis of the evaluation window", 65),
    },
    "outputs": {
        "per_trial_csv": (bool, "write per-trial perturbation records", False),
        "pattern_floor_db": (float, "dB clip floor for pattern CSV", -200.0),
    },
}

_OPTIONAL_SECTIONS = {"perturbation"}


@dataclass(frozen=True)
class BeamConfig:
    direction: tuple[float, float]
    taper: TaperSpec


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario with every default applied."""

    geometry: GeometrySpec
    beams: tuple[BeamConfig, ...]
    grid: AngularGrid
    element_model: str
    cosine_q: float
    altitude_m: float
    mask_factor: float
    gl_threshold_db: float
    link: LinkBudgetParams
    perturbation: PerturbationSpec | None
    perturbation_window: tuple[float | None, int]
    per_trial_csv: bool
    pattern_floor_db: float
    raw: dict = field(repr=False, default_factory=dict)
    applied_defaults: tuple[str, ...] = ()


def _type_name(t) -> str:
    return {int: "integer", float: "number", str: "string", bool: "boolean",
            list: "list"}.get(t, t.__name__)


def _coerce(section: str, key: str, value: Any, want, unit: str):
    if value is None:
        return None
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, bool):
        raise ConfigurationError(
            f"{section}.{key}: expected {_type_name(want)} ({unit}), got boolean"
        )
    if want is float and isinstance(value, bool):
        raise ConfigurationError(
            f"{section}.{key}: expected {_type_name(want)} ({unit}), got boolean"
        )
    if not isinstance(value, want):
        raise ConfigurationError(
            f"{section}.{key}: expected {_type_name(want)} ({unit}), "
            f"got {type(value).__name__} {value!r}"
        )
    return value


def _check_keys(section: str, mapping: dict, schema_keys) -> None:
    for key in mapping:
        if key not in schema_keys:
            hint = difflib.get_close_matches(key, schema_keys, n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigurationError(
                f"unknown key {key!r} in section {section!r}{suggestion}"
            )


def _parse_section(section: str, raw: dict, defaults_log: list[str]) -> dict:
    schema = SCHEMA[section]
    if not isinstance(raw, dict):
        raise ConfigurationError(f"section {section!r} must be a mapping")
    _check_keys(section, raw, schema.keys())
    out = {}
    for key, (want, unit, default) in schema.items():
        if key in raw:
            out[key] = _coerce(section, key, raw[key], want, unit)
        elif default is _REQUIRED:
            raise ConfigurationError(f"missing required key {section}.{key}")
        else:
            out[key] = default
            defaults_log.append(f"{section}.{key}={default!r}")
    return out


def parse_config_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("scenario file must contain a mapping at top level")
    _check_keys("<top level>", data, set(SCHEMA.keys()))
    defaults_log: list[str] = []

    geo = _parse_section("geometry", data.get("geometry", {}), defaults_log)
    if "geometry" not in data:
        raise ConfigurationError("missing required key geometry.kind")
    grid_shape = geo.pop("grid_shape")
    if grid_shape is not None:
        if len(grid_shape) != 2:
            raise ConfigurationError("geometry.grid_shape must be [nx, ny]")
        grid_shape = (int(grid_shape[0]), int(grid_shape[1]))
    geometry = GeometrySpec(grid_shape=grid_shape, **geo)

    beams_raw = data.get("beams", [{}])
    if not isinstance(beams_raw, list):
        raise ConfigurationError("beams must be a list of mappings")
    if not beams_raw:
        raise ConfigurationError("beams must contain at least one entry")
    beams = []
    for b in beams_raw:
        parsed = _parse_section("beams", b, defaults_log)
        beams.append(
            BeamConfig(
                direction=(parsed["u"], parsed["v"]),
                taper=TaperSpec(kind=parsed["taper"], beta=parsed["taper_beta"]),
            )
        )
    if "beams" not in data:
        defaults_log.append("beams=[broadside, uniform taper]")

    g = _parse_section("grid", data.get("grid", {}), defaults_log)
    grid = AngularGrid(**g)

    el = _parse_section("element", data.get("element", {}), defaults_log)
    if el["model"] not in ELEMENT_MODELS:
        raise ConfigurationError(
            f"element.model: expected one of {ELEMENT_MODELS}, got {el['model']!r}"
        )

    an = _parse_section("analysis", data.get("analysis", {}), defaults_log)

    lk = _parse_section("link", data.get("link", {}), defaults_log)
    slant = lk.pop("slant_distance_m")
    if slant is None:
        slant = an["altitude_m"]
        defaults_log.append(f"link.slant_distance_m={slant!r} (altitude)")
    link = LinkBudgetParams(
        frequency_hz=geometry.frequency_hz,
        slant_distance_m=slant,
        n_elements=geometry.n_elements,
        **lk,
    )

    perturbation = None
    window = (None, SCHEMA["perturbation"]["window_n"][2])
    if "perturbation" in data:
        pv = _parse_section("perturbation", data["perturbation"], defaults_log)
        window = (pv.pop("window_halfwidth"), pv.pop("window_n"))
        perturbation = PerturbationSpec(**pv)

    out = _parse_section("outputs", data.get("outputs", {}), defaults_log)

    return ScenarioConfig(
        geometry=geometry,
        beams=tuple(beams),
        grid=grid,
        element_model=el["model"],
        cosine_q=el["cosine_q"],
        altitude_m=an["altitude_m"],
        mask_factor=an["mask_factor"],
        gl_threshold_db=an["gl_threshold_db"],
        link=link,
        perturbation=perturbation,
        perturbation_window=window,
        per_trial_csv=out["per_trial_csv"],
        pattern_floor_db=out["pattern_floor_db"],
        raw=data,
        applied_defaults=tuple(defaults_log),
    )


def parse_config(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        raise ConfigurationError(f"{path} is empty")
    return parse_config_dict(data)


def serialize_config(config: ScenarioConfig) -> str:
    """Round-trippable YAML with every applied default materialized."""
    geometry = {
        "kind": config.geometry.kind,
        "n_platforms": config.geometry.n_platforms,
        "radiators_per_platform": config.geometry.radiators_per_platform,
        "frequency_hz": config.geometry.frequency_hz,
        "spacing_m": config.geometry.spacing_m,
        "radial_scale_m": config.geometry.radial_scale_m,
        "n_arms": config.geometry.n_arms,
        "growth_rate": config.geometry.growth_rate,
        "min_spacing_m": config.geometry.min_spacing_m,
        "grid_shape": list(config.geometry.grid_shape)
        if config.geometry.grid_shape
        else None,
    }
    data = {
        "geometry": geometry,
        "beams": [
            {
                "u": b.direction[0],
                "v": b.direction[1],
                "taper": b.taper.kind,
                "taper_beta": b.taper.beta,
            }
            for b in config.beams
        ],
        "grid": config.grid.to_dict(),
        "element": {"model": config.element_model, "cosine_q": config.cosine_q},
        "analysis": {
            "altitude_m": config.altitude_m,
            "mask_factor": config.mask_factor,
            "gl_threshold_db": config.gl_threshold_db,
        },
        "link": {
            "per_element_power_w": config.link.per_element_power_w,
            "element_gain_dbi": config.link.element_gain_dbi,
            "ue_gain_dbi": config.link.ue_gain_dbi,
            "misc_losses_db": config.link.misc_losses_db,
            "ue_sensitivity_dbm": config.link.ue_sensitivity_dbm,
            "slant_distance_m": config.link.slant_distance_m,
        },
        "outputs": {
            "per_trial_csv": config.per_trial_csv,
            "pattern_floor_db": config.pattern_floor_db,
        },
    }
    if config.perturbation is not None:
        data["perturbation"] = {
            **config.perturbation.to_dict(),
            "window_halfwidth": config.perturbation_window[0],
            "window_n": config.perturbation_window[1],
        }
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)


def default_config_yaml() -> str:
    """The fully defaulted scenario for a minimal geometry section."""
    cfg = parse_config_dict(
        {"geometry": {"kind": "elsa", "n_platforms": 500}}
    )
    return serialize_config(cfg)


def schema_text() -> str:
    lines = ["Scenario file schema (YAML). Sections and keys:", ""]
    for section, keys in SCHEMA.items():
        opt = " (optional section)" if section in _OPTIONAL_SECTIONS else ""
        head = "beams (list of mappings)" if section == "beams" else section
        lines.append(f"[{head}]{opt}")
        for key, (want, unit, default) in keys.items():
            if default is _REQUIRED:
                d = "REQUIRED"
            else:
                d = f"default {default!r}"
            lines.append(f"  {key}: {_type_name(want)}  # {unit}; {d}")
        lines.append("")
    return "\n".join(lines)
