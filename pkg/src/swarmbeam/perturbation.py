"""Monte Carlo beam degradation under position jitter, phase error and
element failures.

Randomness is counter-based: trial t of a run seeded with s draws from a
Philox generator keyed by (s, t), so trials are independent, order-free
and reproducible for any execution schedule.  Per trial the draw order is
fixed: platform position offsets (n_platforms x 3), per-element phase
offsets (N), per-element failure uniforms (N).

Platforms move rigidly: in-plane offsets displace every radiator on the
platform, while the out-of-plane offset dz enters as the phase
2*pi*dz*cos(theta0)/lambda at the steering direction.  Failures silence
the element (zero amplitude) so weight vectors stay aligned with the
geometry.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import measure_main_lobe, sidelobe_metrics, directivity
from .beamforming import (
    AngularGrid,
    Pattern,
    WeightVector,
    evaluate_pattern,
    single_threaded_blas,
)
from .errors import ConfigurationError
from .geometry import ArrayGeometry


@dataclass(frozen=True)
class PerturbationSpec:
    """Stochastic error model; all errors independent, zero-mean Gaussian."""

    sigma_pos_m: float = 0.0
    sigma_phase_rad: float = 0.0
    failure_prob: float = 0.0
    trials: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if self.sigma_pos_m < 0 or self.sigma_phase_rad < 0:
            raise ConfigurationError("error standard deviations must be >= 0")
        if not 0.0 <= self.failure_prob <= 1.0:
            raise ConfigurationError("failure_prob must lie in [0, 1]")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "sigma_pos_m": self.sigma_pos_m,
            "sigma_phase_rad": self.sigma_phase_rad,
            "failure_prob": self.failure_prob,
            "trials": self.trials,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    median: float
    p5: float
    p95: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median, "p5": self.p5, "p95": self.p95}


@dataclass(frozen=True)
class DegradationStats:
    """Aggregates versus the unperturbed baseline.

    ``peak_gain_loss_db`` is 20*log10(peak_trial/peak_base); ``hpbw_rel``
    the relative change of the mean half-power width; ``psll_delta_db``
    the PSLL shift within the evaluated grid region.
    """

    peak_gain_loss_db: SeriesStats
    hpbw_rel: SeriesStats
    psll_delta_db: SeriesStats | None
    trials: int
    per_trial: tuple = field(default=(), repr=False)

    def to_json_dict(self, spec: PerturbationSpec) -> dict:
        return {
            "spec": spec.to_dict(),
            "trials": self.trials,
            "peak_gain_loss_db": self.peak_gain_loss_db.to_dict(),
            "hpbw_rel": self.hpbw_rel.to_dict(),
            "psll_delta_db": (
                self.psll_delta_db.to_dict() if self.psll_delta_db else None
            ),
        }


def _trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=master_seed + (trial_index << 64)))


def perturb_trial(
    geom: ArrayGeometry,
    weights: WeightVector,
    spec: PerturbationSpec,
    trial_index: int,
) -> tuple[ArrayGeometry, WeightVector]:
    """One realization of the error model.

    Weights keep their nominal steering phases (the swarm does not know the
    true positions); the returned geometry carries the displaced positions.
    """
    if len(weights) != geom.n_elements:
        raise ConfigurationError("weights do not match the geometry")
    rng = _trial_rng(spec.master_seed, trial_index)
    n_platforms = int(geom.platform_ids.max()) + 1
    dpos = rng.normal(size=(n_platforms, 3)) * spec.sigma_pos_m
    dphase = rng.normal(size=geom.n_elements) * spec.sigma_phase_rad
    failed = rng.random(geom.n_elements) < spec.failure_prob

    pos = geom.positions + dpos[geom.platform_ids, :2]
    u0, v0 = weights.steer_direction
    w0 = np.sqrt(max(0.0, 1.0 - u0 * u0 - v0 * v0))
    k = 2.0 * np.pi / geom.wavelength_m
    dz_phase = k * w0 * dpos[geom.platform_ids, 2]

    amplitudes = np.where(failed, 0.0, weights.amplitudes)
    phases = weights.phases + dphase + dz_phase
    geom2 = ArrayGeometry(
        positions=pos,
        wavelength_m=geom.wavelength_m,
        spec=geom.spec,
        platform_ids=geom.platform_ids,
        arm_ids=geom.arm_ids,
    )
    weights2 = WeightVector(
        amplitudes=amplitudes,
        phases=phases,
        steer_direction=weights.steer_direction,
        taper_kind=weights.taper_kind,
    )
    return geom2, weights2


def _series(values: np.ndarray) -> SeriesStats:
    return SeriesStats(
        mean=float(values.mean()),
        median=float(np.median(values)),
        p5=float(np.percentile(values, 5)),
        p95=float(np.percentile(values, 95)),
    )


def _peak_magnitude(pattern: Pattern) -> float:
    return float(np.max(np.where(pattern.grid.visible, pattern.magnitude, 0.0)))


def monte_carlo_degradation(
    geom: ArrayGeometry,
    weights: WeightVector,
    grid: AngularGrid,
    spec: PerturbationSpec,
    n_threads: int = 1,
    keep_trials: bool = False,
) -> DegradationStats:
    """Per-trial evaluate-and-measure against the unperturbed baseline.

    The supplied grid must resolve the main lobe (a zoomed window around
    the steering direction keeps trials cheap); PSLL deltas refer to that
    same region.  Trials run independently and aggregate in trial order,
    so results do not depend on ``n_threads``.
    """
    base_pattern = evaluate_pattern(geom, weights, grid)
    base_main = measure_main_lobe(base_pattern)
    base_side = sidelobe_metrics(base_pattern, base_main)
    base_peak = _peak_magnitude(base_pattern)
    base_bw = 0.5 * (base_main.hpbw_u_rad + base_main.hpbw_v_rad)

    def run(trial: int) -> tuple[float, float, float | None]:
        g2, w2 = perturb_trial(geom, weights, spec, trial)
        pat = evaluate_pattern(g2, w2, grid)
        main = measure_main_lobe(pat)
        side = sidelobe_metrics(pat, main)
        loss = 20.0 * np.log10(_peak_magnitude(pat) / base_peak)
        bw = 0.5 * (main.hpbw_u_rad + main.hpbw_v_rad)
        hpbw_rel = (bw - base_bw) / base_bw
        if side.psll_db is None or base_side.psll_db is None:
            delta = None
        else:
            delta = side.psll_db - base_side.psll_db
        return float(loss), float(hpbw_rel), delta

    indices = range(spec.trials)
    with single_threaded_blas():  # held across trials: concurrent evaluations nest
        if n_threads <= 1:
            rows = [run(t) for t in indices]
        else:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                rows = list(pool.map(run, indices))

    losses = np.array([r[0] for r in rows])
    hpbw = np.array([r[1] for r in rows])
    deltas = [r[2] for r in rows]
    psll_stats = None
    if all(d is not None for d in deltas):
        psll_stats = _series(np.array(deltas, dtype=np.float64))
    return DegradationStats(
        peak_gain_loss_db=_series(losses),
        hpbw_rel=_series(hpbw),
        psll_delta_db=psll_stats,
        trials=spec.trials,
        per_trial=tuple(rows) if keep_trials else (),
    )


@dataclass(frozen=True)
class FailureSweepPoint:
    failure_fraction: float
    mean_peak_gain_loss_db: float
    mean_directivity_dbi: float


def failure_sweep(
    geom: ArrayGeometry,
    weights: WeightVector,
    grid: AngularGrid,
    failure_fractions: list[float],
    trials: int,
    seed: int,
    n_threads: int = 1,
) -> list[FailureSweepPoint]:
    """Mean peak-gain loss and directivity versus failed-element fraction.

    Each trial removes round(p*N) elements chosen uniformly at random; the
    count is deterministic per fraction.  The stream for (fraction fi,
    trial t) is keyed by (seed, fi*2^48 + t).
    """
    n = geom.n_elements
    for p in failure_fractions:
        if not 0.0 <= p < 1.0:
            raise ConfigurationError("failure fractions must lie in [0, 1)")
    base_pattern = evaluate_pattern(geom, weights, grid)
    base_peak = _peak_magnitude(base_pattern)

    def run(args: tuple[int, int]) -> tuple[float, float]:
        fi, trial = args
        k = round(failure_fractions[fi] * n)
        rng = _trial_rng(seed, (fi << 48) | trial)
        amplitudes = weights.amplitudes.copy()
        if k > 0:
            dead = rng.choice(n, size=k, replace=False)
            amplitudes[dead] = 0.0
        wv = WeightVector(
            amplitudes=amplitudes,
            phases=weights.phases,
            steer_direction=weights.steer_direction,
            taper_kind=weights.taper_kind,
        )
        pat = evaluate_pattern(geom, wv, grid)
        loss = 20.0 * np.log10(_peak_magnitude(pat) / base_peak)
        return float(loss), directivity(pat)

    points = []
    for fi in range(len(failure_fractions)):
        jobs = [(fi, t) for t in range(trials)]
        with single_threaded_blas():
            if n_threads <= 1:
                rows = [run(j) for j in jobs]
            else:
                with ThreadPoolExecutor(max_workers=n_threads) as pool:
                    rows = list(pool.map(run, jobs))
        losses = np.array([r[0] for r in rows])
        dirs = np.array([r[1] for r in rows])
        points.append(
            FailureSweepPoint(
                failure_fraction=failure_fractions[fi],
                mean_peak_gain_loss_db=float(losses.mean()),
                mean_directivity_dbi=float(dirs.mean()),
            )
        )
    return points


# ---------------------------------------------------------------------------
# export

def degradation_json(stats: DegradationStats, spec: PerturbationSpec) -> str:
    return json.dumps(stats.to_json_dict(spec), indent=2, sort_keys=True) + "\n"


def trials_csv(stats: DegradationStats) -> str:
    """Optional per-trial record: trial, peak loss, HPBW change, PSLL shift."""
    buf = io.StringIO()
    buf.write("trial,peak_loss_db,hpbw_rel,psll_delta_db\n")
    for t, (loss, bw, delta) in enumerate(stats.per_trial):
        d = "" if delta is None else f"{delta:.9g}"
        buf.write(f"{t},{loss:.9g},{bw:.9g},{d}\n")
    return buf.getvalue()
