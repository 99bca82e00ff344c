"""Downlink budget from a coherently combined array to a handheld terminal.

Coherent combining of N equal elements raises EIRP by 20*log10(N) over a
single element (N times the power, N times the array gain):

    EIRP_dBm = 10*log10(P_el * 1000) + G_el + 20*log10(N)
    P_rx_dBm = EIRP_dBm - FSPL_dB - misc_losses_dB + G_ue_dBi

with FSPL = 20*log10(4*pi*d*f/c).  Coherence and pointing degradations are
modeled separately (perturbation module) so the two effects compose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError, InfeasibleTargetError

SPEED_OF_LIGHT = 299792458.0

#: Largest element count the inverse solver will consider.
MAX_ELEMENTS = 10**9


@dataclass(frozen=True)
class LinkBudgetParams:
    frequency_hz: float = 2.0e9
    slant_distance_m: float = 500.0e3
    per_element_power_w: float = 1.0
    element_gain_dbi: float = 5.0
    n_elements: int = 1
    ue_gain_dbi: float = 0.0
    misc_losses_db: float = 3.0
    ue_sensitivity_dbm: float = -100.0

    def __post_init__(self):
        if self.frequency_hz <= 0 or self.slant_distance_m <= 0:
            raise ConfigurationError("frequency and slant distance must be > 0")
        if self.per_element_power_w <= 0:
            raise ConfigurationError("per-element power must be > 0")
        if self.n_elements < 1:
            raise ConfigurationError("n_elements must be >= 1")
        if self.misc_losses_db < 0:
            raise ConfigurationError("misc_losses_db must be >= 0")


@dataclass(frozen=True)
class LinkBudgetResult:
    fspl_db: float
    eirp_dbm: float
    p_rx_dbm: float
    margin_db: float

    def to_json_dict(self, params: LinkBudgetParams) -> dict:
        return {
            "fspl_db": self.fspl_db,
            "eirp_dbm": self.eirp_dbm,
            "p_rx_dbm": self.p_rx_dbm,
            "margin_db": self.margin_db,
            "params": {
                "frequency_hz": params.frequency_hz,
                "slant_distance_m": params.slant_distance_m,
                "per_element_power_w": params.per_element_power_w,
                "element_gain_dbi": params.element_gain_dbi,
                "n_elements": params.n_elements,
                "ue_gain_dbi": params.ue_gain_dbi,
                "misc_losses_db": params.misc_losses_db,
                "ue_sensitivity_dbm": params.ue_sensitivity_dbm,
            },
        }


def fspl(distance_m: float, frequency_hz: float) -> float:
    """Free-space path loss 20*log10(4*pi*d*f/c) in dB."""
    if distance_m <= 0 or frequency_hz <= 0:
        raise ConfigurationError("distance and frequency must be > 0")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def array_eirp(n_elements: int, per_element_power_w: float, element_gain_dbi: float) -> float:
    """Coherent-array EIRP in dBm; reduces to the single-element EIRP at N=1."""
    if n_elements < 1:
        raise ConfigurationError("n_elements must be >= 1")
    if per_element_power_w <= 0:
        raise ConfigurationError("per-element power must be > 0")
    return (
        10.0 * math.log10(per_element_power_w * 1000.0)
        + element_gain_dbi
        + 20.0 * math.log10(n_elements)
    )


def received_power(params: LinkBudgetParams) -> LinkBudgetResult:
    """Received power and margin at the handheld terminal."""
    loss = fspl(params.slant_distance_m, params.frequency_hz)
    eirp = array_eirp(
        params.n_elements, params.per_element_power_w, params.element_gain_dbi
    )
    p_rx = eirp - loss - params.misc_losses_db + params.ue_gain_dbi
    return LinkBudgetResult(
        fspl_db=loss,
        eirp_dbm=eirp,
        p_rx_dbm=p_rx,
        margin_db=p_rx - params.ue_sensitivity_dbm,
    )


def min_elements_for_power(params: LinkBudgetParams, target_p_rx_dbm: float) -> int:
    """Smallest N whose received power meets the target.

    The closed-form inversion of the 20*log10(N) law seeds the answer; the
    bracketing property (p_rx(N) >= target > p_rx(N-1)) is then pinned by
    direct evaluation through the same dB pipeline, which absorbs rounding
    at exact-hit targets.
    """
    base = received_power(replace(params, n_elements=1)).p_rx_dbm
    deficit_db = target_p_rx_dbm - base
    if deficit_db <= 0:
        return 1
    guess = 10.0 ** (deficit_db / 20.0)
    if guess > MAX_ELEMENTS:
        short = target_p_rx_dbm - received_power(
            replace(params, n_elements=MAX_ELEMENTS)
        ).p_rx_dbm
        raise InfeasibleTargetError(
            f"target {target_p_rx_dbm} dBm unreachable with {MAX_ELEMENTS} "
            f"elements (short by {short:.2f} dB)"
        )
    n = max(1, math.floor(guess) - 1)
    while n <= MAX_ELEMENTS:
        if received_power(replace(params, n_elements=n)).p_rx_dbm >= target_p_rx_dbm:
            return n
        n += 1
    raise InfeasibleTargetError(
        f"target {target_p_rx_dbm} dBm unreachable with {MAX_ELEMENTS} elements"
    )


def link_json(params: LinkBudgetParams, result: LinkBudgetResult) -> str:
    return json.dumps(result.to_json_dict(params), indent=2, sort_keys=True) + "\n"
