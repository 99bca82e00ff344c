"""Scenario execution: artifact bundles, parameter sweeps, design comparison.

Artifacts are written atomically (temp file in the target directory, then
rename) and listed in a manifest with SHA-256 digests.  Artifact payloads
are byte-deterministic for a fixed configuration; wall-clock timestamps
live only in the manifest.
"""

from __future__ import annotations

import copy
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import analysis, beamforming, geometry, linkbudget, perturbation
from .config import ScenarioConfig, parse_config_dict
from .errors import ComparabilityError, ConfigurationError, SwarmBeamError

_TOOL_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# atomic artifact store

class ArtifactWriter:
    """Writes named artifacts atomically and accumulates manifest entries."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.entries: list[dict] = []
        os.makedirs(out_dir, exist_ok=True)

    def write_text(self, name: str, text: str) -> str:
        payload = text.encode("utf-8")
        path = os.path.join(self.out_dir, name)
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.entries.append(
            {
                "name": name,
                "path": name,
                "sha256": hashlib.sha256(payload).hexdigest(),
                "bytes": len(payload),
            }
        )
        return path

    def write_manifest(self, config_echo: dict, applied_defaults) -> str:
        manifest = {
            "tool": "swarmbeam",
            "version": _TOOL_VERSION,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "config": config_echo,
            "applied_defaults": list(applied_defaults),
            "artifacts": self.entries,
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        path = os.path.join(self.out_dir, "manifest.json")
        fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=".manifest.")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path


# ---------------------------------------------------------------------------
# scenario pipeline

@dataclass
class ScenarioResult:
    geom: geometry.ArrayGeometry
    stats: geometry.GeometryStats
    patterns: list[beamforming.Pattern]
    metrics: list[analysis.PatternMetrics]
    ci_db: list[float] | None
    link: linkbudget.LinkBudgetResult
    degradation: perturbation.DegradationStats | None


def _build_patterns(config: ScenarioConfig, geom, n_threads: int):
    beams = [(b.direction, b.taper) for b in config.beams]
    return beamforming.evaluate_multibeam(
        geom,
        beams,
        config.grid,
        element_model=config.element_model,
        cosine_q=config.cosine_q,
        n_threads=n_threads,
    )


def _perturbation_grid(config: ScenarioConfig, stats, direction):
    halfwidth, n = config.perturbation_window
    if halfwidth is None:
        d = stats.aperture_diameter_m or config.geometry.wavelength_m
        hpbw_est = 1.02 * config.geometry.wavelength_m / d
        halfwidth = max(5.0 * hpbw_est, 3.0 * 2.0 / max(n - 1, 1))
    return beamforming.AngularGrid.window(direction, halfwidth, n)


def analyze_scenario(config: ScenarioConfig, n_threads: int = 1) -> ScenarioResult:
    """Run the full pipeline without touching the filesystem."""
    geom = geometry.generate(config.geometry)
    stats = geometry.compute_stats(geom)
    patterns = _build_patterns(config, geom, n_threads)
    metrics = [
        analysis.compute_metrics(
            p,
            altitude_m=config.altitude_m,
            mask_factor=config.mask_factor,
            gl_threshold_db=config.gl_threshold_db,
        )
        for p in patterns
    ]
    ci = None
    if len(patterns) > 1:
        ci = analysis.cochannel_ci(patterns, [b.direction for b in config.beams])
    link = linkbudget.received_power(config.link)
    degradation = None
    if config.perturbation is not None:
        wv = beamforming.steering_weights(geom, config.beams[0].direction)
        wv = beamforming.apply_taper(wv, config.beams[0].taper, geom)
        pgrid = _perturbation_grid(config, stats, config.beams[0].direction)
        degradation = perturbation.monte_carlo_degradation(
            geom, wv, pgrid, config.perturbation,
            n_threads=n_threads, keep_trials=config.per_trial_csv,
        )
    return ScenarioResult(geom, stats, patterns, metrics, ci, link, degradation)


def _metrics_payload(result: ScenarioResult, config: ScenarioConfig) -> dict:
    if len(result.metrics) == 1:
        payload = result.metrics[0].to_json_dict()
    else:
        payload = {
            "beams": [m.to_json_dict() for m in result.metrics],
            "ci_db": result.ci_db,
        }
    payload["geometry_stats"] = {
        "d_ave_m": result.stats.d_ave_m,
        "aperture_diameter_m": result.stats.aperture_diameter_m,
        "virtual_aperture_m2": result.stats.virtual_aperture_m2,
        "n_elements": result.stats.n_elements,
    }
    return payload


def run_scenario(
    config: ScenarioConfig,
    out_dir: str,
    n_threads: int = 1,
    stages: tuple[str, ...] = ("geometry", "pattern", "metrics", "link", "perturb"),
) -> tuple[ScenarioResult | None, str]:
    """Produce the artifact bundle for a scenario.

    Stages are cumulative surfaces of the same pipeline: ``geometry`` emits
    the layout CSV, ``pattern`` adds pattern CSVs with sidecar metadata,
    ``metrics`` adds the metric JSON, ``link`` the link-budget JSON and
    ``perturb`` the degradation statistics (when configured).  Returns the
    in-memory result and the manifest path.
    """
    writer = ArtifactWriter(out_dir)
    geom = geometry.generate(config.geometry)
    writer.write_text("geometry.csv", geometry.geometry_to_csv(geom))

    result = None
    if {"pattern", "metrics", "perturb"} & set(stages):
        result = analyze_scenario(config, n_threads=n_threads)
        multi = len(result.patterns) > 1
        for i, p in enumerate(result.patterns):
            stem = f"pattern_{i:03d}" if multi else "pattern"
            writer.write_text(
                f"{stem}.csv",
                beamforming.pattern_to_csv(p, floor_db=config.pattern_floor_db),
            )
            writer.write_text(f"{stem}_meta.json", beamforming.pattern_metadata_json(p))
        if "metrics" in stages:
            payload = _metrics_payload(result, config)
            writer.write_text(
                "metrics.json", json.dumps(payload, indent=2, sort_keys=True) + "\n"
            )
        if "link" in stages:
            writer.write_text(
                "link.json", linkbudget.link_json(config.link, result.link)
            )
        if "perturb" in stages and result.degradation is not None:
            writer.write_text(
                "degradation.json",
                perturbation.degradation_json(result.degradation, config.perturbation),
            )
            if config.per_trial_csv:
                writer.write_text(
                    "degradation_trials.csv",
                    perturbation.trials_csv(result.degradation),
                )
    elif "link" in stages:
        link = linkbudget.received_power(config.link)
        writer.write_text("link.json", linkbudget.link_json(config.link, link))

    manifest = writer.write_manifest(config.raw, config.applied_defaults)
    return result, manifest


# ---------------------------------------------------------------------------
# parameter sweep

_SWEEP_METRIC_KEYS = (
    "n_elements", "d_ave_m", "aperture_diameter_m", "virtual_aperture_m2",
    "hpbw_u_rad", "hpbw_v_rad", "directivity_dbi", "psll_db", "asll_db",
    "gl_count", "r_b_m", "fspl_db", "eirp_dbm", "p_rx_dbm", "margin_db",
)


def _scalar_metrics(result: ScenarioResult) -> dict:
    m = result.metrics[0]
    return {
        "n_elements": result.stats.n_elements,
        "d_ave_m": result.stats.d_ave_m,
        "aperture_diameter_m": result.stats.aperture_diameter_m,
        "virtual_aperture_m2": result.stats.virtual_aperture_m2,
        "hpbw_u_rad": m.hpbw_u_rad,
        "hpbw_v_rad": m.hpbw_v_rad,
        "directivity_dbi": m.directivity_dbi,
        "psll_db": m.psll_db,
        "asll_db": m.asll_db,
        "gl_count": len(m.grating_lobes),
        "r_b_m": m.r_b_m,
        "fspl_db": result.link.fspl_db,
        "eirp_dbm": result.link.eirp_dbm,
        "p_rx_dbm": result.link.p_rx_dbm,
        "margin_db": result.link.margin_db,
    }


def _set_by_path(data: dict, path: str, value) -> None:
    parts = path.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"sweep path {path!r} does not address a mapping")
    node[parts[-1]] = value


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _validate_sweep_path(param_path: str) -> type:
    from .config import SCHEMA

    parts = param_path.split(".")
    if len(parts) != 2 or parts[0] not in SCHEMA or parts[1] not in SCHEMA[parts[0]]:
        raise ConfigurationError(
            f"sweep path {param_path!r} does not name a config field "
            "(expected section.key)"
        )
    want = SCHEMA[parts[0]][parts[1]][0]
    if want not in (int, float):
        raise ConfigurationError(
            f"sweep path {param_path!r} is not numeric (type {want.__name__})"
        )
    return want


def sweep(
    config: ScenarioConfig,
    param_path: str,
    values: list[float],
    n_threads: int = 1,
) -> str:
    """Long-form sweep CSV: one row per (value, metric).

    ``param_path`` is a dotted config path addressing a numeric field
    (e.g. geometry.n_platforms).  Failed points append a row with an error
    message and the sweep continues.
    """
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    want = _validate_sweep_path(param_path)
    buf = io.StringIO()
    buf.write("param,value,metric,result,error\n")
    for value in values:
        raw = copy.deepcopy(config.raw)
        _set_by_path(raw, param_path, want(value))
        try:
            cfg = parse_config_dict(raw)
            result = analyze_scenario(cfg, n_threads=n_threads)
            scalars = _scalar_metrics(result)
            for key in _SWEEP_METRIC_KEYS:
                buf.write(
                    f"{param_path},{_fmt(value)},{key},{_fmt(scalars[key])},\n"
                )
        except SwarmBeamError as exc:
            msg = str(exc).replace("\n", " ").replace(",", ";")
            buf.write(f"{param_path},{_fmt(value)},,,{msg}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# design comparison

_COMPARE_COLUMNS = (
    "design", "n_elements", "d_ave_m", "aperture_diameter_m", "hpbw_rad",
    "r_b_m", "psll_db", "asll_db", "gl_count", "p_rx_dbm", "margin_db",
)


def compare_designs(
    configs: dict[str, ScenarioConfig], n_threads: int = 1
) -> tuple[str, str, str]:
    """Summary table across named designs sharing frequency and altitude.

    Returns (wide CSV, long-form CSV, JSON) payloads.  The HPBW column is
    the larger of the two principal-cut widths (it bounds the footprint).
    """
    if len(configs) < 2:
        raise ComparabilityError("compare needs at least two designs")
    freqs = {c.geometry.frequency_hz for c in configs.values()}
    alts = {c.altitude_m for c in configs.values()}
    if len(freqs) > 1 or len(alts) > 1:
        raise ComparabilityError(
            f"designs must share frequency and altitude; got frequencies {sorted(freqs)} "
            f"and altitudes {sorted(alts)}"
        )
    rows = []
    for name, cfg in configs.items():
        result = analyze_scenario(cfg, n_threads=n_threads)
        m = result.metrics[0]
        hpbw = max(m.hpbw_u_rad, m.hpbw_v_rad)
        rows.append(
            {
                "design": name,
                "n_elements": result.stats.n_elements,
                "d_ave_m": result.stats.d_ave_m,
                "aperture_diameter_m": result.stats.aperture_diameter_m,
                "hpbw_rad": hpbw,
                "r_b_m": analysis.footprint_radius(hpbw, cfg.altitude_m),
                "psll_db": m.psll_db,
                "asll_db": m.asll_db,
                "gl_count": len(m.grating_lobes),
                "p_rx_dbm": result.link.p_rx_dbm,
                "margin_db": result.link.margin_db,
            }
        )
    wide = io.StringIO()
    wide.write(",".join(_COMPARE_COLUMNS) + "\n")
    for r in rows:
        wide.write(",".join(_fmt(r[c]) for c in _COMPARE_COLUMNS) + "\n")
    long = io.StringIO()
    long.write("param,value,metric,result,error\n")
    for r in rows:
        for c in _COMPARE_COLUMNS[1:]:
            long.write(f"design,{r['design']},{c},{_fmt(r[c])},\n")
    payload = json.dumps({"designs": rows}, indent=2, sort_keys=True) + "\n"
    return wide.getvalue(), long.getvalue(), payload
