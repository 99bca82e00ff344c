"""Acceptance suite: one test per shipped criterion, each printing a
pass/fail line with the measured values (run with -s to see them inline).

Shared fixtures cache the expensive 1024^2 evaluations; the timed
criteria measure their own single-threaded wall time.
"""

import json
import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from swarmbeam.analysis import (
    compute_metrics,
    directivity,
    footprint_radius,
    measure_main_lobe,
    sidelobe_metrics,
)
from swarmbeam.beamforming import (
    AngularGrid,
    TaperSpec,
    apply_taper,
    evaluate_pattern,
    steering_weights,
)
from swarmbeam.geometry import GeometrySpec, compute_stats, generate
from swarmbeam.linkbudget import (
    LinkBudgetParams,
    fspl,
    min_elements_for_power,
    received_power,
)
from swarmbeam.perturbation import (
    PerturbationSpec,
    failure_sweep,
    monte_carlo_degradation,
)
from swarmbeam.runner import run_scenario

FREQ = 2.0e9
LAM = 299792458.0 / FREQ
GRID_1024 = AngularGrid(1024, 1024)


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def elsa_spec(n_platforms: int, spacing_wavelengths: float) -> GeometrySpec:
    return GeometrySpec(
        "elsa",
        n_platforms,
        n_arms=5,
        growth_rate=0.05,
        min_spacing_m=spacing_wavelengths * LAM,
        frequency_hz=FREQ,
    )


@pytest.fixture(scope="module")
def elsa500_sparse():
    """ELSA swarm, N=500, mean spacing ~10 wavelengths, with its 1024^2
    broadside pattern (shared by criteria 2, 7, 8 and 9)."""
    geom = generate(elsa_spec(500, 10.0))
    wv = steering_weights(geom, (0.0, 0.0))
    pattern = evaluate_pattern(geom, wv, GRID_1024)
    return geom, wv, pattern


class TestCriterion1:
    def test_grating_lobe_reproduction(self):
        t0 = time.perf_counter()
        spec = GeometrySpec(
            "sparse-square", 256, spacing_m=10 * LAM, frequency_hz=FREQ
        )
        geom = generate(spec)
        pattern = evaluate_pattern(
            geom, steering_weights(geom, (0.0, 0.0)), GRID_1024, n_threads=1
        )
        main = measure_main_lobe(pattern)
        side = sidelobe_metrics(pattern, main)
        elapsed = time.perf_counter() - t0

        cell = max(GRID_1024.cell_u, GRID_1024.cell_v)
        period = 0.1  # lambda/d
        matched = [
            g
            for g in side.grating_lobes
            if g.u**2 + g.v**2 <= 0.81
            and abs(g.u - period * round(g.u / period)) <= cell
            and abs(g.v - period * round(g.v / period)) <= cell
            and abs(g.level_db - main.peak_level_db) <= 0.1
        ]
        ok = len(matched) >= 4 and elapsed < 30.0
        report(
            1,
            ok,
            f"{len(matched)} grating lobes on the lambda/d lattice within "
            f"0.1 dB of the main lobe (total reported {len(side.grating_lobes)}); "
            f"runtime {elapsed:.1f} s (< 30 s)",
        )


class TestCriterion2:
    def test_elsa_mitigation(self, elsa500_sparse):
        geom, _, pattern = elsa500_sparse
        t0 = time.perf_counter()
        stats = compute_stats(geom)
        main = measure_main_lobe(pattern)
        side = sidelobe_metrics(pattern, main, gl_threshold_db=-10.0)
        elapsed = time.perf_counter() - t0
        d_ave_ok = abs(stats.d_ave_m - 10 * LAM) / (10 * LAM) < 0.2
        ok = (
            d_ave_ok
            and len(side.grating_lobes) == 0
            and side.psll_db <= -10.0
            and elapsed < 60.0
        )
        report(
            2,
            ok,
            f"d_ave = {stats.d_ave_m / LAM:.2f} lambda, grating lobes at -10 dB: "
            f"{len(side.grating_lobes)}, PSLL = {side.psll_db:.2f} dB (<= -10); "
            f"metric runtime {elapsed:.1f} s (< 60 s)",
        )


class TestCriterion3:
    def test_sidelobe_floor_tracks_one_over_n(self):
        results = {}
        for n in (100, 300, 1000):
            geom = generate(elsa_spec(n, 10.0))
            pattern = evaluate_pattern(
                geom, steering_weights(geom, (0.0, 0.0)), GRID_1024
            )
            side = sidelobe_metrics(pattern, measure_main_lobe(pattern))
            results[n] = side.asll_db
        base_ok = abs(results[100] - (-20.0)) <= 3.0
        track_ok = all(
            abs(results[n] - 10 * math.log10(1.0 / n)) <= 3.0 for n in results
        )
        detail = ", ".join(
            f"N={n}: ASLL {results[n]:.2f} dB (floor {10 * math.log10(1 / n):.2f})"
            for n in results
        )
        report(3, base_ok and track_ok, detail)


class TestCriterion4:
    def test_order_of_magnitude_element_reduction(self, tmp_path):
        t0 = time.perf_counter()
        out = str(tmp_path / "compare")
        proc = subprocess.run(
            [
                sys.executable, "-m", "swarmbeam.cli", "--out", out, "compare",
                "--classical", "builtin:classical",
                "--sparse", "builtin:sparse-square",
                "--elsa", "builtin:elsa",
            ],
            capture_output=True, text=True,
        )
        elapsed = time.perf_counter() - t0
        assert proc.returncode == 0, proc.stderr
        rows = {}
        with open(f"{out}/compare.csv") as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                vals = line.strip().split(",")
                rows[vals[0]] = dict(zip(header, vals))
        classical = rows["classical"]
        elsa = rows["elsa"]
        sparse = rows["sparse-square"]
        n_classical = int(classical["n_elements"])
        n_elsa = int(elsa["n_elements"])
        ok = (
            float(classical["r_b_m"]) <= 5000.0
            and n_classical >= 5000
            and float(elsa["r_b_m"]) <= 5000.0
            and float(elsa["psll_db"]) <= -10.0
            and n_elsa * 10 <= n_classical
            and int(sparse["gl_count"]) >= 4
            and int(elsa["gl_count"]) == 0
            and elapsed < 300.0
        )
        report(
            4,
            ok,
            f"classical N={n_classical} (r_B {float(classical['r_b_m']) / 1e3:.2f} km) "
            f"vs elsa N={n_elsa} (r_B {float(elsa['r_b_m']) / 1e3:.2f} km, "
            f"PSLL {float(elsa['psll_db']):.1f} dB, GLs {elsa['gl_count']}); "
            f"sparse-square GLs {sparse['gl_count']}; runtime {elapsed:.0f} s (< 300 s)",
        )


class TestCriterion5:
    def test_link_budget_oracle(self):
        loss = fspl(500e3, FREQ)
        fspl_ok = abs(loss - 152.44) <= 0.01

        rng = np.random.default_rng(2024)
        identity_ok = True
        bracket_ok = True
        for _ in range(100):
            p = LinkBudgetParams(
                frequency_hz=float(rng.uniform(0.5e9, 6e9)),
                slant_distance_m=float(rng.uniform(300e3, 2000e3)),
                per_element_power_w=float(rng.uniform(0.1, 10.0)),
                element_gain_dbi=float(rng.uniform(-2.0, 12.0)),
                n_elements=int(rng.integers(1, 5000)),
                ue_gain_dbi=float(rng.uniform(-5.0, 5.0)),
                misc_losses_db=float(rng.uniform(0.0, 10.0)),
            )
            r = received_power(p)
            identity = r.eirp_dbm - r.fspl_db - p.misc_losses_db + p.ue_gain_dbi
            if abs(r.p_rx_dbm - identity) > 1e-12:
                identity_ok = False
            target = received_power(replace(p, n_elements=1)).p_rx_dbm + float(
                rng.uniform(0.0, 70.0)
            )
            n = min_elements_for_power(p, target)
            if received_power(replace(p, n_elements=n)).p_rx_dbm < target:
                bracket_ok = False
            if n > 1 and received_power(replace(p, n_elements=n - 1)).p_rx_dbm >= target:
                bracket_ok = False
        ok = fspl_ok and identity_ok and bracket_ok
        report(
            5,
            ok,
            f"fspl(500 km, 2 GHz) = {loss:.4f} dB (152.44 +- 0.01); dB identity "
            f"to 1e-12 and min-element bracketing on 100 random draws",
        )


class TestCriterion6:
    def test_directivity_oracle(self):
        spec = GeometrySpec("rectangular-lattice", 100, frequency_hz=FREQ)
        geom = generate(spec)
        wv = steering_weights(geom, (0.0, 0.0))
        d1 = directivity(evaluate_pattern(geom, wv, GRID_1024))
        d2 = directivity(evaluate_pattern(geom, wv, AngularGrid(2048, 2048)))
        estimate = 10 * math.log10(4 * math.pi * 25)  # 4*pi*A/lam^2, A = 25 lam^2
        ok = abs(d1 - estimate) <= 1.0 and abs(d2 - d1) < 0.2
        report(
            6,
            ok,
            f"10x10 lattice directivity {d1:.2f} dBi vs aperture estimate "
            f"{estimate:.2f} dBi (+- 1 dB); refinement change {abs(d2 - d1):.3f} dB "
            f"(< 0.2 dB)",
        )


class TestCriterion7:
    def test_coherence_law(self, elsa500_sparse):
        geom, wv, _ = elsa500_sparse
        grid = AngularGrid.window((0.0, 0.0), 0.02, 65)
        details = []
        ok = True
        for sigma in (0.1, 0.3, 0.5):
            spec = PerturbationSpec(
                sigma_phase_rad=sigma, trials=1000, master_seed=1000 + int(sigma * 10)
            )
            stats = monte_carlo_degradation(geom, wv, grid, spec)
            want = 10 * math.log10(math.exp(-(sigma**2)))
            err = stats.peak_gain_loss_db.mean - want
            ok = ok and abs(err) <= 0.2
            details.append(
                f"sigma={sigma}: {stats.peak_gain_loss_db.mean:.3f} dB "
                f"(law {want:.3f}, err {err:+.3f})"
            )
        report(7, ok, "; ".join(details))


class TestCriterion8:
    def test_graceful_degradation(self, elsa500_sparse):
        geom, wv, _ = elsa500_sparse
        grid = AngularGrid.window((0.0, 0.0), 0.02, 65)
        spec = PerturbationSpec(failure_prob=0.1, trials=1000, master_seed=88)
        stats = monte_carlo_degradation(geom, wv, grid, spec)
        want = 20 * math.log10(0.9)
        loss_ok = abs(stats.peak_gain_loss_db.mean - want) <= 0.3

        lattice = generate(GeometrySpec("rectangular-lattice", 256, frequency_hz=FREQ))
        lwv = steering_weights(lattice, (0.0, 0.0))
        points = failure_sweep(
            lattice, lwv, AngularGrid(129, 129),
            [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], trials=1000, seed=99,
        )
        losses = [p.mean_peak_gain_loss_db for p in points]
        dirs = [p.mean_directivity_dbi for p in points]
        sweep_ok = all(b <= a for a, b in zip(losses, losses[1:]))
        ok = loss_ok and sweep_ok
        report(
            8,
            ok,
            f"mean loss at p=0.1: {stats.peak_gain_loss_db.mean:.3f} dB "
            f"(law {want:.3f} +- 0.3); sweep losses "
            f"{['%.2f' % v for v in losses]} non-increasing "
            f"(directivity {dirs[0]:.1f} -> {dirs[-1]:.1f} dBi)",
        )


class TestCriterion9:
    def test_tapering_contrast(self, elsa500_sparse):
        lattice = generate(
            GeometrySpec("rectangular-lattice", 1024, frequency_hz=FREQ)
        )
        taper = TaperSpec("radial-hamming")

        def psll_of(geom, pattern=None, tapered=False):
            wv = steering_weights(geom, (0.0, 0.0))
            if tapered:
                wv = apply_taper(wv, taper, geom)
            p = pattern or evaluate_pattern(geom, wv, GRID_1024)
            return sidelobe_metrics(p, measure_main_lobe(p)).psll_db

        lattice_uniform = psll_of(lattice)
        lattice_tapered = psll_of(lattice, tapered=True)
        lattice_delta = lattice_uniform - lattice_tapered

        geom, _, elsa_pattern = elsa500_sparse
        elsa_uniform = psll_of(geom, pattern=elsa_pattern)
        elsa_tapered = psll_of(geom, tapered=True)
        elsa_delta = elsa_uniform - elsa_tapered

        ok = lattice_delta >= 10.0 and elsa_delta < lattice_delta
        report(
            9,
            ok,
            f"32x32 lattice PSLL {lattice_uniform:.2f} -> {lattice_tapered:.2f} dB "
            f"(delta {lattice_delta:.2f} dB, >= 10); elsa PSLL {elsa_uniform:.2f} -> "
            f"{elsa_tapered:.2f} dB (delta {elsa_delta:.2f} dB, strictly smaller)",
        )


class TestCriterion10:
    CONFIGS = ("classical", "sparse-square", "elsa", "elsa-sparse")

    def test_determinism_across_threads(self, tmp_path):
        from swarmbeam.cli import _resolve_config_path
        from swarmbeam.config import parse_config

        details = []
        ok = True
        for name in self.CONFIGS:
            cfg = parse_config(_resolve_config_path(f"builtin:{name}"))
            digests = []
            for run, threads in (("a", 1), ("b", 1), ("c", 2), ("d", 8)):
                out = tmp_path / f"{name}-{run}"
                _, manifest_path = run_scenario(cfg, str(out), n_threads=threads)
                manifest = json.loads(open(manifest_path).read())
                digests.append(
                    tuple((a["name"], a["sha256"]) for a in manifest["artifacts"])
                )
            same = all(d == digests[0] for d in digests[1:])
            ok = ok and same
            details.append(f"{name}: {'identical' if same else 'MISMATCH'}")
        report(10, ok, "byte-identical artifacts across reruns and 1/2/8 threads: "
               + ", ".join(details))
