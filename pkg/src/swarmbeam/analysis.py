"""Beam metrics: main lobe, sidelobe statistics, directivity, footprint.

dB conventions are fixed project-wide: field quantities use 20*log10,
power quantities 10*log10.  All relative levels are referenced to the
main-lobe peak estimate, which is capped at the coherent maximum sum|w_n|
(0 dB after normalization) since no array factor can exceed it.

Local-maximum levels (the main peak and reported grating lobes) are
refined by a separable three-point parabola in dB along each grid axis.
The refinement is rejected per axis when the implied vertex shift exceeds
0.75 cells, which keeps under-resolved ripples from inflating levels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .beamforming import AngularGrid, Pattern
from .errors import BeamTooWideError, DirectionError, ResolutionError

HALF_POWER_DB = 20.0 * math.log10(math.sqrt(2.0))  # 3.0103 dB

#: Default level (dB below peak) above which an exterior maximum counts as
#: a grating lobe.
GL_THRESHOLD_DB = -10.0

#: Default main-lobe mask semi-axis per axis, in units of the half-power
#: beamwidth.  1.5 * HPBW approximates the first-null radius of
#: aperture-like beams.
MASK_FACTOR = 1.5

#: Mask semi-axes never shrink below this many grid cells.
MASK_FLOOR_CELLS = 2.0

#: Rim band half-thickness (in 1 - u^2 - v^2) for the directivity
#: quadrature, in units of the larger grid cell.
_RIM_BAND_CELLS = 8.0


@dataclass(frozen=True)
class GratingLobe:
    u: float
    v: float
    level_db: float  # relative to the main-lobe peak


@dataclass(frozen=True)
class MainLobe:
    """Measured main-lobe geometry and the exterior mask derived from it."""

    peak_index: tuple[int, int]
    peak_direction: tuple[float, float]      # grid point of the argmax
    refined_direction: tuple[float, float]   # sub-cell peak estimate
    peak_level_db: float                     # dB relative to coherent max, <= 0
    hpbw_u_rad: float
    hpbw_v_rad: float
    hpbw_u_dc: float                         # widths in direction cosines
    hpbw_v_dc: float
    mask: np.ndarray                         # True inside the main-lobe region

    def __post_init__(self):
        self.mask.setflags(write=False)


@dataclass(frozen=True)
class SidelobeMetrics:
    """Exterior-region levels; None when the mask covers everything."""

    psll_db: float | None
    asll_db: float | None
    grating_lobes: tuple[GratingLobe, ...]


@dataclass(frozen=True)
class PatternMetrics:
    peak_u: float
    peak_v: float
    hpbw_u_rad: float
    hpbw_v_rad: float
    directivity_dbi: float | None
    psll_db: float | None
    asll_db: float | None
    grating_lobes: tuple[GratingLobe, ...]
    r_b_m: float | None
    notes: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "peak_u": self.peak_u,
            "peak_v": self.peak_v,
            "hpbw_u_rad": self.hpbw_u_rad,
            "hpbw_v_rad": self.hpbw_v_rad,
            "directivity_dbi": self.directivity_dbi,
            "psll_db": self.psll_db,
            "asll_db": self.asll_db,
            "grating_lobes": [
                {"u": g.u, "v": g.v, "level_db": g.level_db} for g in self.grating_lobes
            ],
            "r_b_m": self.r_b_m,
            "notes": list(self.notes),
        }


def metrics_json(metrics: PatternMetrics) -> str:
    return json.dumps(metrics.to_json_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# peak refinement

def _refine_axis(a: float, b: float, c: float, max_shift: float = 0.75):
    """Parabola vertex through three equally spaced dB samples.

    Returns (shift_in_cells, level_gain_db); (0, 0) when the fit is not a
    maximum or the vertex lands more than max_shift cells away.
    """
    den = a - 2.0 * b + c
    if not np.isfinite(den) or den >= 0.0:
        return 0.0, 0.0
    shift = 0.5 * (a - c) / den
    if abs(shift) > max_shift:
        return 0.0, 0.0
    return shift, -((a - c) ** 2) / (8.0 * den)


def _refine_peak(db: np.ndarray, i: int, j: int) -> tuple[float, float, float]:
    """Sub-cell (di, dj) offset and refined level for the sample (i, j)."""
    level = db[i, j]
    di = dj = 0.0
    if 0 < i < db.shape[0] - 1:
        di, gain = _refine_axis(db[i - 1, j], db[i, j], db[i + 1, j])
        level += gain
    if 0 < j < db.shape[1] - 1:
        dj, gain = _refine_axis(db[i, j - 1], db[i, j], db[i, j + 1])
        level += gain
    return di, dj, level


# ---------------------------------------------------------------------------
# main lobe

def _cross_axis_width(u: np.ndarray, line_db: np.ndarray, center: int,
                      threshold: float) -> tuple[float, float]:
    """Left/right crossing coordinates of ``threshold`` around ``center``
    by linear interpolation in dB; raises when not bracketed in range."""
    n = len(line_db)
    left = center
    while left > 0 and line_db[left] > threshold:
        left -= 1
    if line_db[left] > threshold:
        raise BeamTooWideError(
            "-3 dB contour not bracketed inside the grid; enlarge the grid "
            "extent or sample count"
        )
    right = center
    while right < n - 1 and line_db[right] > threshold:
        right += 1
    if line_db[right] > threshold:
        raise BeamTooWideError(
            "-3 dB contour not bracketed inside the grid; enlarge the grid "
            "extent or sample count"
        )
    ul = np.interp(threshold, [line_db[left], line_db[left + 1]], [u[left], u[left + 1]])
    ur = np.interp(threshold, [line_db[right], line_db[right - 1]], [u[right], u[right - 1]])
    return float(ul), float(ur)


def _arcsin_clip(x: float) -> float:
    return math.asin(min(1.0, max(-1.0, x)))


def measure_main_lobe(
    pattern: Pattern,
    mask_factor: float = MASK_FACTOR,
    mask_floor_cells: float = MASK_FLOOR_CELLS,
) -> MainLobe:
    """Locate the peak and measure half-power beamwidths.

    The peak is the grid argmax of |AF| over the visible region (ties break
    to the lowest u index, then the lowest v index).  HPBW along each
    principal cut is found by linear interpolation of the 20*log10|AF|
    crossings at peak - 3.0103 dB and reported in radians via arcsin of the
    crossing coordinates.  The main-lobe mask is an ellipse centered on the
    refined peak with semi-axes mask_factor * HPBW per axis (floored at
    mask_floor_cells grid cells).
    """
    grid = pattern.grid
    db = pattern.normalized_db(floor_db=-400.0)
    vis = grid.visible
    mag = np.where(vis, db, -np.inf)
    flat = int(np.argmax(mag))  # C-order: lowest u index first, then lowest v
    i0, j0 = np.unravel_index(flat, mag.shape)
    if not np.isfinite(mag[i0, j0]):
        raise BeamTooWideError("pattern has no visible-region samples")

    # A periodic layout can alias the steered lobe at full level (grating
    # lobes); off-grid sampling may then rank an alias above the steered
    # lobe.  The steered lobe is the main lobe by construction, so it wins
    # whenever its refined level ties the global argmax within 0.5 dB.
    su0, sv0 = pattern.steer_direction
    if grid.u[0] <= su0 <= grid.u[-1] and grid.v[0] <= sv0 <= grid.v[-1]:
        is_, js_ = grid.nearest_index((su0, sv0))
        if vis[is_, js_] and (is_, js_) != (i0, j0):
            if _refine_peak(db, is_, js_)[2] >= _refine_peak(db, i0, j0)[2] - 0.5:
                i0, j0 = is_, js_

    di, dj, level = _refine_peak(db, i0, j0)
    level = min(level, 0.0)  # the coherent maximum bounds every peak
    peak_u = float(grid.u[i0])
    peak_v = float(grid.v[j0])
    refined = (peak_u + di * grid.cell_u, peak_v + dj * grid.cell_v)

    threshold = db[i0, j0] - HALF_POWER_DB
    ul, ur = _cross_axis_width(grid.u, db[:, j0], i0, threshold)
    vl, vr = _cross_axis_width(grid.v, db[i0, :], j0, threshold)
    hpbw_u_dc = ur - ul
    hpbw_v_dc = vr - vl
    hpbw_u = _arcsin_clip(ur) - _arcsin_clip(ul)
    hpbw_v = _arcsin_clip(vr) - _arcsin_clip(vl)

    su = max(mask_factor * hpbw_u_dc, mask_floor_cells * grid.cell_u)
    sv = max(mask_factor * hpbw_v_dc, mask_floor_cells * grid.cell_v)
    uu, vv = np.meshgrid(grid.u, grid.v, indexing="ij")
    mask = ((uu - refined[0]) / su) ** 2 + ((vv - refined[1]) / sv) ** 2 <= 1.0
    return MainLobe(
        peak_index=(int(i0), int(j0)),
        peak_direction=(peak_u, peak_v),
        refined_direction=(float(refined[0]), float(refined[1])),
        peak_level_db=float(level),
        hpbw_u_rad=float(hpbw_u),
        hpbw_v_rad=float(hpbw_v),
        hpbw_u_dc=float(hpbw_u_dc),
        hpbw_v_dc=float(hpbw_v_dc),
        mask=mask,
    )


# ---------------------------------------------------------------------------
# sidelobes and grating lobes

def sidelobe_metrics(
    pattern: Pattern,
    main: MainLobe | np.ndarray,
    gl_threshold_db: float = GL_THRESHOLD_DB,
) -> SidelobeMetrics:
    """Exterior-region levels relative to the main-lobe peak.

    PSLL is the raw maximum of the normalized samples outside the mask;
    ASLL is 10*log10 of their mean squared magnitude.  Grating lobes are
    strict 8-neighborhood local maxima outside the mask whose refined level
    clears ``gl_threshold_db``.
    """
    grid = pattern.grid
    if isinstance(main, MainLobe):
        mask = main.mask
        ref_db = main.peak_level_db
    else:
        mask = np.asarray(main, dtype=bool)
        ref_db = 0.0
    exterior = grid.visible & ~mask
    if not exterior.any():
        return SidelobeMetrics(None, None, ())

    db = pattern.normalized_db(floor_db=-400.0)
    psll = float(db[exterior].max() - ref_db)
    mean_power = float(np.mean((pattern.magnitude[exterior] / pattern.norm) ** 2))
    ref_power = 10.0 ** (ref_db / 10.0)
    asll = float(10.0 * math.log10(mean_power / ref_power)) if mean_power > 0 else None

    # strict local maxima: above every 8-neighbor (outside-visible treated
    # as -inf so rim lobes still register)
    mag = np.where(grid.visible, pattern.magnitude, -np.inf)
    footprint = np.ones((3, 3), dtype=bool)
    footprint[1, 1] = False
    neighbor_max = ndimage.maximum_filter(mag, footprint=footprint, mode="constant",
                                          cval=-np.inf)
    local_max = (mag > neighbor_max) & exterior
    lobes = []
    for i, j in zip(*np.nonzero(local_max)):
        di, dj, level = _refine_peak(db, i, j)
        level = min(level, 0.0)
        rel = level - ref_db
        if rel >= gl_threshold_db:
            lobes.append(
                GratingLobe(
                    u=float(grid.u[i] + di * grid.cell_u),
                    v=float(grid.v[j] + dj * grid.cell_v),
                    level_db=float(rel),
                )
            )
    lobes.sort(key=lambda g: (-g.level_db, g.u, g.v))
    return SidelobeMetrics(psll, asll, tuple(lobes))


# ---------------------------------------------------------------------------
# directivity

def directivity(pattern: Pattern, min_samples_per_hpbw: float = 4.0) -> float:
    """Directivity D = 4*pi*|AF_peak|^2 / integral(|AF|^2 dOmega) in dBi.

    The integral runs over the visible hemisphere with
    dOmega = du*dv/sqrt(1 - u^2 - v^2), evaluated as a Riemann sum away
    from the unit-circle rim plus an exact solid-angle band correction for
    the rim (where the 1/sqrt weight is singular).

    Raises ResolutionError when the main lobe spans fewer than
    ``min_samples_per_hpbw`` grid cells along either principal cut.
    """
    main = measure_main_lobe(pattern)
    grid = pattern.grid
    cells_u = main.hpbw_u_dc / grid.cell_u if grid.cell_u else np.inf
    cells_v = main.hpbw_v_dc / grid.cell_v if grid.cell_v else np.inf
    if min(cells_u, cells_v) < min_samples_per_hpbw:
        raise ResolutionError(
            f"main lobe spans {min(cells_u, cells_v):.2f} grid cells; "
            f"need >= {min_samples_per_hpbw} for the directivity quadrature"
        )
    uu, vv = np.meshgrid(grid.u, grid.v, indexing="ij")
    rho2 = uu * uu + vv * vv
    delta = _RIM_BAND_CELLS * max(grid.cell_u, grid.cell_v)
    safe = rho2 <= 1.0 - delta
    band = (rho2 <= 1.0) & ~safe
    power = pattern.magnitude**2
    integral = float(
        np.sum(power[safe] / np.sqrt(1.0 - rho2[safe])) * grid.cell_u * grid.cell_v
    )
    if band.any():
        # exact solid angle of the rim band: 2*pi*sqrt(delta)
        integral += float(power[band].mean()) * 2.0 * np.pi * math.sqrt(delta)
    peak_power = float(np.max(np.where(grid.visible, power, 0.0)))
    return 10.0 * math.log10(4.0 * np.pi * peak_power / integral)


# ---------------------------------------------------------------------------
# Earth footprint

def footprint_radius(hpbw_rad: float, altitude_m: float) -> float:
    """Nadir coverage radius r_B = altitude * tan(hpbw/2) (flat-tangent)."""
    if not 0.0 < hpbw_rad < np.pi / 2:
        raise DirectionError("hpbw must lie in (0, pi/2)")
    if altitude_m <= 0:
        raise DirectionError("altitude must be > 0")
    return altitude_m * math.tan(hpbw_rad / 2.0)


def required_aperture_for_footprint(
    target_r_b_m: float, altitude_m: float, wavelength_m: float
) -> float:
    """Aperture diameter whose beam covers at most ``target_r_b_m`` at
    nadir: hpbw = 2*atan(r_B/h), D = 1.02*lambda/hpbw."""
    if target_r_b_m <= 0:
        raise DirectionError("target footprint radius must be > 0")
    hpbw = 2.0 * math.atan(target_r_b_m / altitude_m)
    return 1.02 * wavelength_m / hpbw


# ---------------------------------------------------------------------------
# multi-beam interference

def cochannel_ci(
    patterns: list[Pattern], beam_centers: list[tuple[float, float]]
) -> list[float] | None:
    """Carrier-to-interference per beam, evaluated at each beam center.

    Entry i is 10*log10(|AF_i(c_i)|^2 / sum_{j != i} |AF_j(c_i)|^2) with
    centers snapped to the shared grid.  A single beam has no interferers
    and yields None.
    """
    if len(patterns) != len(beam_centers):
        raise DirectionError("one center per pattern is required")
    if len(patterns) < 2:
        return None
    grid = patterns[0].grid
    for p in patterns[1:]:
        if p.grid != grid:
            raise DirectionError("C/I requires patterns on a shared grid")
    idx = []
    for c in beam_centers:
        if c[0] ** 2 + c[1] ** 2 > 1.0:
            raise DirectionError(f"beam center {c} lies outside the visible region")
        iu, iv = grid.nearest_index(c)
        if not grid.visible[iu, iv]:
            raise DirectionError(f"beam center {c} snaps outside the visible region")
        idx.append((iu, iv))
    out = []
    for i, (iu, iv) in enumerate(idx):
        carrier = abs(patterns[i].af[iu, iv]) ** 2
        interference = sum(
            abs(patterns[j].af[iu, iv]) ** 2 for j in range(len(patterns)) if j != i
        )
        out.append(10.0 * math.log10(carrier / interference))
    return out


# ---------------------------------------------------------------------------
# aggregate

def compute_metrics(
    pattern: Pattern,
    altitude_m: float | None = None,
    mask_factor: float = MASK_FACTOR,
    gl_threshold_db: float = GL_THRESHOLD_DB,
) -> PatternMetrics:
    """Full metric bundle for one pattern.

    Directivity is reported absent (with a note) when the grid is too
    coarse for the quadrature; every other metric stays valid.
    """
    main = measure_main_lobe(pattern, mask_factor=mask_factor)
    side = sidelobe_metrics(pattern, main, gl_threshold_db=gl_threshold_db)
    notes = []
    try:
        d = directivity(pattern)
    except ResolutionError as exc:
        d = None
        notes.append(f"directivity skipped: {exc}")
    r_b = None
    if altitude_m is not None:
        r_b = footprint_radius(max(main.hpbw_u_rad, main.hpbw_v_rad), altitude_m)
    return PatternMetrics(
        peak_u=main.peak_direction[0],
        peak_v=main.peak_direction[1],
        hpbw_u_rad=main.hpbw_u_rad,
        hpbw_v_rad=main.hpbw_v_rad,
        directivity_dbi=d,
        psll_db=side.psll_db,
        asll_db=side.asll_db,
        grating_lobes=side.grating_lobes,
        r_b_m=r_b,
        notes=tuple(notes),
    )
