"""Excitation weights and far-field array-factor evaluation.

The array factor over direction cosines (u, v) is the direct sum

    AF(u, v) = sum_n w_n * exp(j * (2*pi/lambda) * (x_n*u + y_n*v)),

optionally multiplied by a scalar cosine^q element pattern
(sqrt(1 - u^2 - v^2))^q inside the visible region u^2 + v^2 <= 1.  The sum
is evaluated exactly (no FFT shortcut); layouts here are non-uniform.

Evaluation is partitioned into fixed-size row blocks over the u axis.
Blocks may be computed by a thread pool, but the block layout and the
per-point summation order never depend on the worker count, so results are
bit-identical for any number of threads.
"""

from __future__ import annotations

import io
import json
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import i0
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, DirectionError
from .geometry import ArrayGeometry

_blas_guard = threading.Lock()
_blas_depth = 0
_blas_limiter = None


@contextmanager
def single_threaded_blas():
    """Pin BLAS to one thread for deterministic reductions.

    threadpoolctl limits are process-global, so nested or concurrent users
    share one depth-counted registration; the limit is released only when
    the last user leaves.
    """
    global _blas_depth, _blas_limiter
    with _blas_guard:
        _blas_depth += 1
        if _blas_depth == 1:
            _blas_limiter = threadpool_limits(limits=1)
    try:
        yield
    finally:
        with _blas_guard:
            _blas_depth -= 1
            if _blas_depth == 0:
                _blas_limiter.unregister()
                _blas_limiter = None

TAPER_KINDS = ("uniform", "radial-hann", "radial-hamming", "radial-taylor-approx")

ELEMENT_MODELS = ("isotropic", "cosine")

#: Fixed evaluation block height (rows of u); independent of thread count.
_ROW_BLOCK = 64


@dataclass(frozen=True)
class AngularGrid:
    """Uniform direction-cosine sampling grid.

    Samples include both range endpoints.  The visible region is the unit
    disk u^2 + v^2 <= 1; points outside it are flagged by ``visible`` and
    excluded from metric integrals and exports.
    """

    n_u: int = 1024
    n_v: int = 1024
    u_min: float = -1.0
    u_max: float = 1.0
    v_min: float = -1.0
    v_max: float = 1.0

    def __post_init__(self):
        if self.n_u < 1 or self.n_v < 1:
            raise ConfigurationError("grid sample counts must be >= 1")
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ConfigurationError("grid ranges must be ordered")

    @classmethod
    def window(cls, center: tuple[float, float], halfwidth: float, n: int) -> "AngularGrid":
        u0, v0 = center
        return cls(
            n_u=n, n_v=n,
            u_min=u0 - halfwidth, u_max=u0 + halfwidth,
            v_min=v0 - halfwidth, v_max=v0 + halfwidth,
        )

    @cached_property
    def u(self) -> np.ndarray:
        u = np.linspace(self.u_min, self.u_max, self.n_u)
        u.setflags(write=False)
        return u

    @cached_property
    def v(self) -> np.ndarray:
        v = np.linspace(self.v_min, self.v_max, self.n_v)
        v.setflags(write=False)
        return v

    @cached_property
    def visible(self) -> np.ndarray:
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        m = uu * uu + vv * vv <= 1.0
        m.setflags(write=False)
        return m

    @property
    def cell_u(self) -> float:
        return (self.u_max - self.u_min) / (self.n_u - 1) if self.n_u > 1 else 0.0

    @property
    def cell_v(self) -> float:
        return (self.v_max - self.v_min) / (self.n_v - 1) if self.n_v > 1 else 0.0

    def nearest_index(self, direction: tuple[float, float]) -> tuple[int, int]:
        iu = int(np.argmin(np.abs(self.u - direction[0])))
        iv = int(np.argmin(np.abs(self.v - direction[1])))
        return iu, iv

    def to_dict(self) -> dict:
        return {
            "n_u": self.n_u, "n_v": self.n_v,
            "u_min": self.u_min, "u_max": self.u_max,
            "v_min": self.v_min, "v_max": self.v_max,
        }


@dataclass(frozen=True)
class TaperSpec:
    """Amplitude taper: a radial window of normalized centroid distance.

    ``beta`` parameterizes only the radial-taylor-approx window (a
    one-parameter I0 aperture taper; larger beta lowers sidelobes).
    """

    kind: str = "uniform"
    beta: float = 3.0

    def __post_init__(self):
        if self.kind not in TAPER_KINDS:
            raise ConfigurationError(
                f"unknown taper kind {self.kind!r}; expected one of {TAPER_KINDS}"
            )

    def window(self, t: np.ndarray) -> np.ndarray:
        """Window value at normalized radius t in [0, 1]; window(0) = 1."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "uniform":
            return np.ones_like(t)
        if self.kind == "radial-hann":
            return 0.5 + 0.5 * np.cos(np.pi * t)
        if self.kind == "radial-hamming":
            return 0.54 + 0.46 * np.cos(np.pi * t)
        # radial-taylor-approx
        return i0(self.beta * np.sqrt(np.clip(1.0 - t * t, 0.0, None))) / i0(self.beta)


@dataclass(frozen=True)
class WeightVector:
    """Complex excitation per element, stored as amplitude and phase arrays.

    Keeping amplitude and phase separate lets tapering rescale amplitudes
    without touching phase bits.  ``steer_direction`` is the (u0, v0) the
    phases were computed for.
    """

    amplitudes: np.ndarray
    phases: np.ndarray
    steer_direction: tuple[float, float]
    taper_kind: str = "uniform"

    def __post_init__(self):
        amp = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.float64))
        ph = np.ascontiguousarray(np.asarray(self.phases, dtype=np.float64))
        if amp.shape != ph.shape or amp.ndim != 1:
            raise ConfigurationError("amplitudes and phases must be equal-length 1-D arrays")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "phases", ph)
        amp.setflags(write=False)
        ph.setflags(write=False)

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def complex_weights(self) -> np.ndarray:
        return self.amplitudes * np.exp(1j * self.phases)

    @property
    def amplitude_sum(self) -> float:
        return float(np.abs(self.amplitudes).sum())


@dataclass(frozen=True)
class Pattern:
    """Sampled array factor on an AngularGrid.

    ``af`` is the unnormalized complex array factor with shape
    (n_u, n_v); ``norm`` is the coherent maximum sum |w_n| used by metric
    code and exports for normalization.
    """

    af: np.ndarray
    grid: AngularGrid
    norm: float
    wavelength_m: float
    steer_direction: tuple[float, float]
    taper_kind: str = "uniform"
    element_model: str = "isotropic"

    def __post_init__(self):
        self.af.setflags(write=False)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.af)

    def normalized_db(self, floor_db: float = -200.0) -> np.ndarray:
        """20*log10(|AF|/norm), clipped below at floor_db."""
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(np.abs(self.af) / self.norm)
        return np.maximum(db, floor_db)


def steering_weights(geom: ArrayGeometry, direction: tuple[float, float]) -> WeightVector:
    """Unit-amplitude weights phasing the array toward ``direction``.

    w_n = exp(-j * (2*pi/lambda) * (x_n*u0 + y_n*v0)); the evaluated
    pattern then peaks at (u0, v0).
    """
    u0, v0 = float(direction[0]), float(direction[1])
    if u0 * u0 + v0 * v0 > 1.0:
        raise DirectionError(f"steer direction ({u0}, {v0}) lies outside the unit disk")
    k = 2.0 * np.pi / geom.wavelength_m
    phases = -k * (geom.x * u0 + geom.y * v0)
    return WeightVector(
        amplitudes=np.ones(geom.n_elements),
        phases=phases,
        steer_direction=(u0, v0),
    )


def apply_taper(weights: WeightVector, taper: TaperSpec, geom: ArrayGeometry) -> WeightVector:
    """Scale amplitudes by the radial window of centroid distance.

    Phases are carried over untouched (same array object).  A single-element
    geometry has no radial extent; the taper degenerates to the identity and
    a warning is emitted.
    """
    if len(weights) != geom.n_elements:
        raise ConfigurationError(
            f"weight vector length {len(weights)} does not match geometry "
            f"element count {geom.n_elements}"
        )
    centroid = geom.positions.mean(axis=0)
    rho = np.hypot(geom.x - centroid[0], geom.y - centroid[1])
    rho_max = rho.max()
    if rho_max == 0.0:
        warnings.warn("taper on a single-element geometry is the identity")
        factors = np.ones_like(rho)
    else:
        factors = taper.window(rho / rho_max)
    return WeightVector(
        amplitudes=weights.amplitudes * factors,
        phases=weights.phases,
        steer_direction=weights.steer_direction,
        taper_kind=taper.kind,
    )


def _element_factor(grid: AngularGrid, model: str, q: float) -> np.ndarray | None:
    if model == "isotropic":
        return None
    uu, vv = np.meshgrid(grid.u, grid.v, indexing="ij")
    w = np.sqrt(np.clip(1.0 - uu * uu - vv * vv, 0.0, None))
    return w**q


def evaluate_pattern(
    geom: ArrayGeometry,
    weights: WeightVector,
    grid: AngularGrid,
    element_model: str = "isotropic",
    cosine_q: float = 1.0,
    n_threads: int = 1,
) -> Pattern:
    """Evaluate the array factor over the grid.

    The element loop is a fixed-order reduction within each fixed 64-row
    block, so the result is bit-identical for any ``n_threads``.
    """
    if element_model not in ELEMENT_MODELS:
        raise ConfigurationError(
            f"unknown element model {element_model!r}; expected one of {ELEMENT_MODELS}"
        )
    if len(weights) != geom.n_elements:
        raise ConfigurationError(
            f"weight vector length {len(weights)} does not match geometry "
            f"element count {geom.n_elements}"
        )
    k = 2.0 * np.pi / geom.wavelength_m
    w = weights.complex_weights
    u, v = grid.u, grid.v
    ev = np.exp(1j * k * np.outer(v, geom.y))  # (n_v, N), shared read-only
    evt = ev.T
    af = np.empty((grid.n_u, grid.n_v), dtype=np.complex128)

    def run_block(start: int) -> None:
        end = min(start + _ROW_BLOCK, grid.n_u)
        eu = np.exp(1j * k * np.outer(u[start:end], geom.x))
        np.matmul(w * eu, evt, out=af[start:end])

    starts = range(0, grid.n_u, _ROW_BLOCK)
    with single_threaded_blas():
        if n_threads <= 1:
            for s in starts:
                run_block(s)
        else:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                list(pool.map(run_block, starts))

    factor = _element_factor(grid, element_model, cosine_q)
    if factor is not None:
        af *= factor
    return Pattern(
        af=af,
        grid=grid,
        norm=weights.amplitude_sum,
        wavelength_m=geom.wavelength_m,
        steer_direction=weights.steer_direction,
        taper_kind=weights.taper_kind,
        element_model=element_model,
    )


def evaluate_multibeam(
    geom: ArrayGeometry,
    beams: list[tuple[tuple[float, float], TaperSpec]],
    grid: AngularGrid,
    element_model: str = "isotropic",
    cosine_q: float = 1.0,
    n_threads: int = 1,
) -> list[Pattern]:
    """One pattern per (direction, taper) beam over a shared grid."""
    if not beams:
        raise DirectionError("multibeam evaluation needs at least one beam")
    patterns = []
    for direction, taper in beams:
        wv = steering_weights(geom, direction)
        wv = apply_taper(wv, taper, geom)
        patterns.append(
            evaluate_pattern(geom, wv, grid, element_model, cosine_q, n_threads)
        )
    return patterns


# ---------------------------------------------------------------------------
# export

def pattern_to_csv(pattern: Pattern, floor_db: float = -200.0) -> str:
    """CSV export ``u,v,af_db`` with af_db = 20*log10(|AF|/norm) clipped at
    the floor; points outside the visible region are omitted."""
    db = pattern.normalized_db(floor_db)
    vis = pattern.grid.visible
    u, v = pattern.grid.u, pattern.grid.v
    buf = io.StringIO()
    buf.write("u,v,af_db\n")
    for i in range(pattern.grid.n_u):
        row_vis = vis[i]
        row_db = db[i]
        ui = u[i]
        for j in np.nonzero(row_vis)[0]:
            buf.write(f"{ui:.9g},{v[j]:.9g},{row_db[j]:.9g}\n")
    return buf.getvalue()


def pattern_metadata(pattern: Pattern) -> dict:
    """Sidecar metadata for a pattern CSV."""
    return {
        "grid": pattern.grid.to_dict(),
        "wavelength_m": pattern.wavelength_m,
        "steer_u": pattern.steer_direction[0],
        "steer_v": pattern.steer_direction[1],
        "taper_kind": pattern.taper_kind,
        "element_model": pattern.element_model,
        "norm": pattern.norm,
    }


def pattern_metadata_json(pattern: Pattern) -> str:
    return json.dumps(pattern_metadata(pattern), indent=2, sort_keys=True) + "\n"
