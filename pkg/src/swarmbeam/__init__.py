"""swarmbeam: design and analysis of distributed satellite swarm phased
arrays for direct-to-cell links.

Submodules: geometry (layouts), beamforming (weights and patterns),
analysis (beam metrics), linkbudget (received power), perturbation
(Monte Carlo degradation), runner (scenario pipeline), cli.
"""

from .analysis import (
    PatternMetrics,
    cochannel_ci,
    compute_metrics,
    directivity,
    footprint_radius,
    measure_main_lobe,
    required_aperture_for_footprint,
    sidelobe_metrics,
)
from .beamforming import (
    AngularGrid,
    Pattern,
    TaperSpec,
    WeightVector,
    apply_taper,
    evaluate_multibeam,
    evaluate_pattern,
    steering_weights,
)
from .config import ScenarioConfig, parse_config
from .errors import SwarmBeamError
from .geometry import (
    ArrayGeometry,
    GeometrySpec,
    GeometryStats,
    compute_stats,
    generate,
    generate_elsa,
    generate_rectangular,
    generate_sunflower,
)
from .linkbudget import (
    LinkBudgetParams,
    LinkBudgetResult,
    array_eirp,
    fspl,
    min_elements_for_power,
    received_power,
)
from .perturbation import (
    DegradationStats,
    PerturbationSpec,
    failure_sweep,
    monte_carlo_degradation,
    perturb_trial,
)
from .runner import analyze_scenario, compare_designs, run_scenario, sweep

__version__ = "0.1.0"

__all__ = [
    "AngularGrid",
    "ArrayGeometry",
    "DegradationStats",
    "GeometrySpec",
    "GeometryStats",
    "LinkBudgetParams",
    "LinkBudgetResult",
    "Pattern",
    "PatternMetrics",
    "PerturbationSpec",
    "ScenarioConfig",
    "SwarmBeamError",
    "TaperSpec",
    "WeightVector",
    "analyze_scenario",
    "apply_taper",
    "array_eirp",
    "cochannel_ci",
    "compare_designs",
    "compute_metrics",
    "compute_stats",
    "directivity",
    "evaluate_multibeam",
    "evaluate_pattern",
    "failure_sweep",
    "footprint_radius",
    "fspl",
    "generate",
    "generate_elsa",
    "generate_rectangular",
    "generate_sunflower",
    "measure_main_lobe",
    "min_elements_for_power",
    "monte_carlo_degradation",
    "parse_config",
    "perturb_trial",
    "received_power",
    "required_aperture_for_footprint",
    "run_scenario",
    "sidelobe_metrics",
    "steering_weights",
    "sweep",
]
