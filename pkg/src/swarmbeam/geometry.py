"""Array element layouts for distributed swarm apertures.

Generators produce planar (z = 0) element layouts for four geometry kinds:

* ``rectangular-lattice`` / ``sparse-square`` -- an n x n grid of platforms
  with pitch d.  The same generator covers the dense half-wavelength lattice
  and the sparse swarm whose pitch is many wavelengths.
* ``sunflower`` -- golden-angle spiral: platform n at radius s*sqrt(n) and
  azimuth n*gamma with gamma = 2*pi*(1 - 1/phi) ~ 2.399963 rad.
* ``elsa`` -- multi-arm logarithmic spiral r(theta) = s*exp(b*theta).
  Elements are placed by greedy arc-length stepping: the candidate angle is
  advanced until the new element clears the declared minimum spacing against
  every element already placed (on all arms), so the accepted layout is
  min-spacing feasible by construction.  Arm k is arm 0 rotated by
  2*pi*k/n_arms.

Every generator recenters the layout on its centroid and validates the
pairwise minimum spacing.  Platforms may carry more than one radiating
element (a tight half-wavelength square subarray per platform).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import ConfigurationError, SpacingError, SynthesisError

SPEED_OF_LIGHT = 299792458.0

#: Golden angle 2*pi*(1 - 1/phi), phi the golden ratio.
GOLDEN_ANGLE = 2.0 * np.pi * (1.0 - 2.0 / (1.0 + np.sqrt(5.0)))

GEOMETRY_KINDS = ("rectangular-lattice", "sparse-square", "sunflower", "elsa")

#: Candidate-step budget for the spiral placement search.
DEFAULT_STEP_BUDGET = 10**6


@dataclass(frozen=True)
class GeometrySpec:
    """Parametric description of an array layout.

    Lengths are meters, frequency is hertz.  ``spacing_m`` is the lattice
    pitch (lattice kinds), ``radial_scale_m`` the spiral scale factor,
    ``growth_rate`` the logarithmic-spiral growth per radian (elsa only).
    Unset optional lengths are resolved against the wavelength when a
    generator runs: spacing and min_spacing default to lambda/2 and
    radial_scale defaults to min_spacing.
    """

    kind: str
    n_platforms: int
    radiators_per_platform: int = 1
    frequency_hz: float = 2.0e9
    spacing_m: float | None = None
    radial_scale_m: float | None = None
    n_arms: int = 5
    growth_rate: float = 0.05
    min_spacing_m: float | None = None
    grid_shape: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in GEOMETRY_KINDS:
            raise ConfigurationError(
                f"unknown geometry kind {self.kind!r}; expected one of {GEOMETRY_KINDS}"
            )
        if self.n_platforms < 1:
            raise ConfigurationError("n_platforms must be >= 1")
        if self.radiators_per_platform < 1:
            raise ConfigurationError("radiators_per_platform must be >= 1")
        if self.frequency_hz <= 0:
            raise ConfigurationError("frequency_hz must be > 0")
        for name in ("spacing_m", "radial_scale_m", "min_spacing_m"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.n_arms < 1:
            raise ConfigurationError("n_arms must be >= 1")
        if self.growth_rate <= 0:
            raise ConfigurationError("growth_rate must be > 0")
        if self.grid_shape is not None:
            nx, ny = self.grid_shape
            if nx * ny != self.n_platforms:
                raise ConfigurationError(
                    f"grid_shape {nx}x{ny} does not match n_platforms={self.n_platforms}"
                )

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def n_elements(self) -> int:
        return self.n_platforms * self.radiators_per_platform

    def resolved(self) -> "GeometrySpec":
        """Spec with all optional lengths filled in from the wavelength."""
        lam = self.wavelength_m
        spacing = self.spacing_m if self.spacing_m is not None else lam / 2.0
        dmin = self.min_spacing_m if self.min_spacing_m is not None else lam / 2.0
        scale = self.radial_scale_m if self.radial_scale_m is not None else dmin
        return replace(self, spacing_m=spacing, min_spacing_m=dmin, radial_scale_m=scale)


@dataclass(frozen=True)
class ArrayGeometry:
    """Realized element positions on the array plane (z = 0).

    ``positions`` is an (N, 2) array in meters, recentered so the centroid
    is the origin.  ``platform_ids`` and ``arm_ids`` carry per-element
    bookkeeping (arm id is -1 for non-spiral kinds).  Arrays are marked
    read-only; geometries are safe to share across threads.

    The generator-enforced minimum pairwise spacing is the declared
    min_spacing for single-radiator platforms; with subarrays the
    half-wavelength subarray pitch caps the element-level minimum at
    lambda/2.
    """

    positions: np.ndarray
    wavelength_m: float
    spec: GeometrySpec
    platform_ids: np.ndarray = field(repr=False, default=None)
    arm_ids: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ConfigurationError("positions must be an (N, 2) array")
        object.__setattr__(self, "positions", pos)
        if self.platform_ids is None:
            object.__setattr__(self, "platform_ids", np.arange(len(pos), dtype=np.int32))
        if self.arm_ids is None:
            object.__setattr__(self, "arm_ids", np.full(len(pos), -1, dtype=np.int32))
        for name in ("positions", "platform_ids", "arm_ids"):
            getattr(self, name).setflags(write=False)

    @property
    def n_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.positions[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.positions[:, 1]


@dataclass(frozen=True)
class GeometryStats:
    """Aggregate layout statistics.

    ``d_ave_m`` is the mean nearest-neighbor distance (None for a single
    element), ``aperture_diameter_m`` the maximum pairwise distance and
    ``virtual_aperture_m2`` the convex-hull area (0 for degenerate sets).
    """

    d_ave_m: float | None
    aperture_diameter_m: float
    virtual_aperture_m2: float
    n_elements: int


# ---------------------------------------------------------------------------
# helpers

def _recenter(points: np.ndarray) -> np.ndarray:
    return points - points.mean(axis=0)


def _subarray_offsets(n_radiators: int, wavelength: float) -> np.ndarray:
    """Offsets of a tight half-wavelength square subarray, centered on its
    own centroid.  Cells are filled row-major on the smallest square grid
    holding n_radiators."""
    if n_radiators == 1:
        return np.zeros((1, 2))
    side = math.ceil(math.sqrt(n_radiators))
    pitch = wavelength / 2.0
    cells = [(i % side, i // side) for i in range(n_radiators)]
    off = np.array(cells, dtype=np.float64) * pitch
    return _recenter(off)


def _expand_subarrays(
    platforms: np.ndarray, arms: np.ndarray, spec: GeometrySpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_r = spec.radiators_per_platform
    off = _subarray_offsets(n_r, spec.wavelength_m)
    n_p = len(platforms)
    pos = (platforms[:, None, :] + off[None, :, :]).reshape(n_p * n_r, 2)
    pids = np.repeat(np.arange(n_p, dtype=np.int32), n_r)
    aids = np.repeat(arms.astype(np.int32), n_r)
    return pos, pids, aids


def _min_pair_distance(points: np.ndarray) -> tuple[float, tuple[int, int]]:
    tree = cKDTree(points)
    dist, idx = tree.query(points, k=2)
    j = int(np.argmin(dist[:, 1]))
    return float(dist[j, 1]), (j, int(idx[j, 1]))


def _effective_min_spacing(spec: GeometrySpec) -> float:
    dmin = spec.min_spacing_m
    if spec.radiators_per_platform > 1:
        dmin = min(dmin, spec.wavelength_m / 2.0)
    return dmin


def _validate(pos: np.ndarray, spec: GeometrySpec) -> None:
    if len(pos) < 2:
        return
    dmin_req = _effective_min_spacing(spec)
    dmin, (i, j) = _min_pair_distance(pos)
    if dmin <= 0.0:
        raise SpacingError(f"elements {i} and {j} coincide")
    if dmin < dmin_req * (1.0 - 1e-9):
        raise SpacingError(
            f"elements {i} and {j} are {dmin:.6g} m apart, below the "
            f"minimum spacing {dmin_req:.6g} m"
        )


def _finalize(
    platforms: np.ndarray, arms: np.ndarray, spec: GeometrySpec
) -> ArrayGeometry:
    pos, pids, aids = _expand_subarrays(platforms, arms, spec)
    pos = _recenter(pos)
    _validate(pos, spec)
    return ArrayGeometry(
        positions=pos,
        wavelength_m=spec.wavelength_m,
        spec=spec,
        platform_ids=pids,
        arm_ids=aids,
    )


# ---------------------------------------------------------------------------
# generators

def generate(spec: GeometrySpec) -> ArrayGeometry:
    """Dispatch to the generator for ``spec.kind``."""
    spec = spec.resolved()
    if spec.kind in ("rectangular-lattice", "sparse-square"):
        return generate_rectangular(spec)
    if spec.kind == "sunflower":
        return generate_sunflower(spec)
    return generate_elsa(spec)


def generate_rectangular(spec: GeometrySpec) -> ArrayGeometry:
    """n x n (or explicit nx x ny) platform grid with pitch ``spacing_m``.

    Platforms with more than one radiator are replaced by a tight
    half-wavelength square subarray centered on the platform position; the
    pitch must leave room for the subarray footprint.
    """
    if spec.kind not in ("rectangular-lattice", "sparse-square"):
        raise ConfigurationError(f"generate_rectangular cannot build kind {spec.kind!r}")
    spec = spec.resolved()
    if spec.grid_shape is not None:
        nx, ny = spec.grid_shape
    else:
        side = math.isqrt(spec.n_platforms)
        if side * side != spec.n_platforms:
            raise ConfigurationError(
                f"n_platforms={spec.n_platforms} is not a perfect square; "
                "supply grid_shape=(nx, ny) with nx*ny = n_platforms"
            )
        nx = ny = side
    d = spec.spacing_m
    n_r = spec.radiators_per_platform
    if n_r > 1 and nx * ny > 1:
        side_sub = math.ceil(math.sqrt(n_r))
        footprint = (side_sub - 1) * spec.wavelength_m / 2.0
        if d <= footprint:
            raise SpacingError(
                f"platform pitch {d:.6g} m cannot hold a {n_r}-element "
                f"half-wavelength subarray (footprint {footprint:.6g} m)"
            )
    ix = np.arange(nx, dtype=np.float64) - (nx - 1) / 2.0
    iy = np.arange(ny, dtype=np.float64) - (ny - 1) / 2.0
    gx, gy = np.meshgrid(ix * d, iy * d, indexing="ij")
    platforms = np.column_stack([gx.ravel(), gy.ravel()])
    arms = np.full(len(platforms), -1, dtype=np.int32)
    return _finalize(platforms, arms, spec)


def generate_sunflower(spec: GeometrySpec) -> ArrayGeometry:
    """Golden-angle spiral: platform n at radius scale*sqrt(n), azimuth
    n*GOLDEN_ANGLE, for n = 1..n_platforms."""
    if spec.kind != "sunflower":
        raise ConfigurationError(f"generate_sunflower cannot build kind {spec.kind!r}")
    spec = spec.resolved()
    n = np.arange(1, spec.n_platforms + 1, dtype=np.float64)
    r = spec.radial_scale_m * np.sqrt(n)
    phi = n * GOLDEN_ANGLE
    platforms = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    arms = np.zeros(len(platforms), dtype=np.int32)
    return _finalize(platforms, arms, spec)


def _arm_counts(n_platforms: int, n_arms: int) -> list[int]:
    base, extra = divmod(n_platforms, n_arms)
    return [base + (1 if k < extra else 0) for k in range(n_arms)]


def _rotation_matrices(n_arms: int) -> np.ndarray:
    rot = 2.0 * np.pi / n_arms
    return np.stack(
        [
            np.array(
                [[np.cos(k * rot), -np.sin(k * rot)], [np.sin(k * rot), np.cos(k * rot)]]
            )
            for k in range(n_arms)
        ]
    )


def _greedy_arm(spec: GeometrySpec, count: int, step_budget: int) -> np.ndarray:
    """Arm-0 points in placement order, raw spiral coordinates.

    The candidate angle advances in arc-length steps of min_spacing/8 until
    the candidate clears min_spacing against every already-placed element on
    every arm (rotated copies included); the search starts at the smallest
    radius where adjacent arms are min_spacing apart.
    """
    n_arms = spec.n_arms
    scale = spec.radial_scale_m
    b = spec.growth_rate
    dmin = spec.min_spacing_m
    rot_mats = _rotation_matrices(n_arms)
    # smallest chord between a point and its rotated copies, per unit radius
    min_chord = 2.0 * np.sin(np.pi / n_arms) if n_arms > 1 else np.inf

    theta = 0.0
    if n_arms > 1:
        r_start = dmin / min_chord
        if scale < r_start:
            theta = np.log(r_start / scale) / b
    arc_scale = np.sqrt(1.0 + b * b)
    dmin2 = dmin * dmin

    arm0: list[np.ndarray] = []
    placed = np.empty((0, 2))  # accepted points on all arms
    steps = 0
    while len(arm0) < count:
        if steps >= step_budget:
            raise SynthesisError(
                f"no min-spacing-feasible placement for element {len(arm0) + 1} "
                f"of arm 0 within {step_budget} candidate steps"
            )
        steps += 1
        r = scale * np.exp(b * theta)
        cand = np.array([r * np.cos(theta), r * np.sin(theta)])
        ok = True
        if n_arms > 1 and r * min_chord < dmin:
            ok = False
        if ok and placed.size:
            d2 = np.square(placed - cand).sum(axis=1)
            ok = bool(d2.min() >= dmin2)
        step = dmin / (r * arc_scale)
        if ok:
            arm0.append(cand)
            placed = np.concatenate([placed, (rot_mats @ cand).reshape(n_arms, 2)])
            theta += step
        else:
            theta += step / 8.0
    return np.array(arm0)


def generate_elsa(spec: GeometrySpec, step_budget: int = DEFAULT_STEP_BUDGET) -> ArrayGeometry:
    """Multi-arm logarithmic spiral with greedy min-spacing placement.

    Arm 0 follows r(theta) = radial_scale * exp(growth_rate * theta) with
    elements placed by the greedy search in ``_greedy_arm``; arm k is arm 0
    rotated by 2*pi*k/n_arms.  When n_platforms is not divisible by n_arms
    the first arms carry one extra element.

    Raises SynthesisError when more than ``step_budget`` candidate steps are
    spent without completing the layout.
    """
    if spec.kind != "elsa":
        raise ConfigurationError(f"generate_elsa cannot build kind {spec.kind!r}")
    spec = spec.resolved()
    counts = _arm_counts(spec.n_platforms, spec.n_arms)
    rot_mats = _rotation_matrices(spec.n_arms)
    pts0 = _greedy_arm(spec, counts[0], step_budget)
    platforms = np.concatenate(
        [pts0[: counts[k]] @ rot_mats[k].T for k in range(spec.n_arms)]
    )
    arms = np.concatenate(
        [np.full(counts[k], k, dtype=np.int32) for k in range(spec.n_arms)]
    )
    return _finalize(platforms, arms, spec)


# ---------------------------------------------------------------------------
# statistics and export

def compute_stats(geom: ArrayGeometry) -> GeometryStats:
    """Nearest-neighbor mean distance, max pairwise distance, hull area."""
    pos = geom.positions
    n = len(pos)
    if n == 0:
        raise ConfigurationError("geometry is empty")
    if n == 1:
        return GeometryStats(None, 0.0, 0.0, 1)
    tree = cKDTree(pos)
    dist, _ = tree.query(pos, k=2)
    d_ave = float(dist[:, 1].mean())
    try:
        hull = ConvexHull(pos)
        hp = pos[hull.vertices]
        area = float(hull.volume)  # 2-D hull: volume is the area
    except QhullError:
        hp = pos  # degenerate (collinear) set
        area = 0.0
    diff = hp[:, None, :] - hp[None, :, :]
    diameter = float(np.sqrt(np.square(diff).sum(axis=2).max()))
    return GeometryStats(d_ave, diameter, area, n)


def scale_to_target_d_ave(spec: GeometrySpec, target_d_ave_m: float) -> GeometrySpec:
    """Rescale a spiral spec so the realized mean nearest-neighbor distance
    hits the target.  Uses exact scale equivariance: lengths in the spec are
    multiplied by target/measured."""
    spec = spec.resolved()
    stats = compute_stats(generate(spec))
    if stats.d_ave_m is None:
        raise ConfigurationError("cannot calibrate a single-element geometry")
    c = target_d_ave_m / stats.d_ave_m
    return replace(
        spec,
        spacing_m=spec.spacing_m * c,
        radial_scale_m=spec.radial_scale_m * c,
        min_spacing_m=spec.min_spacing_m * c,
    )


def geometry_to_csv(geom: ArrayGeometry) -> str:
    """CSV export: one row per element, 9 significant digits.

    Columns: index, platform, arm, x_m, y_m (arm is -1 for lattice kinds).
    """
    buf = io.StringIO()
    buf.write("index,platform,arm,x_m,y_m\n")
    for i in range(geom.n_elements):
        buf.write(
            f"{i},{geom.platform_ids[i]},{geom.arm_ids[i]},"
            f"{geom.positions[i, 0]:.9g},{geom.positions[i, 1]:.9g}\n"
        )
    return buf.getvalue()
