"""功耗、效率与链路预算

EIRP/PDC 只计 TX 模式的直流功耗；共享 LO 分配网络的功耗作为显式开销项。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, List

from script.core.model import BudgetError
from script.utils.unit_converter import UnitConverter

if TYPE_CHECKING:
    from script.core.link_sim import Scenario

logger = logging.getLogger(__name__)

ELEMENTS_PER_DIE = 4


@dataclass(frozen=True)
class PowerBudget:
    """DC power bookkeeping, all values in mW."""

    pdc_tx_per_element: float = 250.0
    pdc_rx_per_element: float = 160.0
    n_elements: int = 16
    shared_overhead: float = 0.0

    def __post_init__(self):
        for name in ("pdc_tx_per_element", "pdc_rx_per_element", "shared_overhead"):
            if getattr(self, name) < 0:
                raise BudgetError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.n_elements < 0:
            raise BudgetError(f"n_elements must be >= 0, got {self.n_elements}")

    @property
    def total_tx_mw(self) -> float:
        return self.n_elements * self.pdc_tx_per_element + self.shared_overhead

    @property
    def total_rx_mw(self) -> float:
        return self.n_elements * self.pdc_rx_per_element + self.shared_overhead

    def scaled(self, k: float) -> "PowerBudget":
        return PowerBudget(
            self.pdc_tx_per_element * k,
            self.pdc_rx_per_element * k,
            self.n_elements,
            self.shared_overhead * k,
        )


@dataclass(frozen=True)
class LinkBudgetInput:
    """
    Attributes:
        eirp: dBm
        carrier: Hz
        distance: m
        rx_antenna_gain: dBi
        rx_conversion_gain: dB, informational (gain raises signal and noise alike)
        noise_figure: dB
        bandwidth: Hz, noise bandwidth
    """

    eirp: float
    carrier: float
    distance: float
    rx_antenna_gain: float = 12.0
    rx_conversion_gain: float = 32.0
    noise_figure: float = 9.0
    bandwidth: float = 2e9

    def __post_init__(self):
        if self.distance <= 0:
            raise BudgetError(f"distance must be > 0, got {self.distance}")
        if self.bandwidth <= 0:
            raise BudgetError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.carrier <= 0:
            raise BudgetError(f"carrier must be > 0, got {self.carrier}")


def eirp_over_pdc(eirp_dbm: float, budget: PowerBudget) -> float:
    """辐射功率占 TX 直流功耗的百分比"""
    total_w = UnitConverter.mw_to_watt(budget.total_tx_mw)
    if total_w <= 0:
        raise BudgetError("total TX PDC is zero; efficiency undefined")
    return 100.0 * UnitConverter.dbm_to_watt(eirp_dbm) / total_w


def fspl(carrier: float, distance: float) -> float:
    """Free-space path loss in dB: 20 log10(4π d f / c)."""
    if carrier <= 0 or distance <= 0:
        raise BudgetError("carrier and distance must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance * carrier / UnitConverter.SPEED_OF_LIGHT)


def noise_floor_dbm(bandwidth: float, noise_figure: float) -> float:
    return UnitConverter.THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure


def rx_snr(link: LinkBudgetInput) -> float:
    """接收端 SNR（dB）：EIRP − FSPL + 接收天线增益 − 噪底"""
    received = link.eirp - fspl(link.carrier, link.distance) + link.rx_antenna_gain
    return received - noise_floor_dbm(link.bandwidth, link.noise_figure)


def data_rate(order: int, symbol_rate: float) -> float:
    """Raw bit rate in b/s."""
    if order < 2 or order & (order - 1):
        raise BudgetError(f"modulation order must be a power of two, got {order}")
    return math.log2(order) * symbol_rate


_TABLE_FIELDS = ("band_plan", "array", "power", "channel", "modulations")


def table1_figures(scenario: "Scenario") -> Dict[str, Any]:
    """Self-consistent performance summary computed from scenario inputs."""
    from script.core.freq_plan import plan_weaver
    from script.core.model import Topology
    from script.core.weaver import count_components

    missing: List[str] = [f for f in _TABLE_FIELDS if getattr(scenario, f, None) is None]
    if missing:
        raise BudgetError(f"scenario is missing: {', '.join(missing)}")

    n = scenario.array.geometry.n_elements
    power = scenario.power
    budget = power.budget_for(n)
    if n < 1 or budget.n_elements < 1:
        raise BudgetError("scenario has no elements")

    derived = power.derived_eirp(n)
    eirp_dbm = power.eirp_dbm if power.eirp_dbm is not None else derived
    spread = power.eirp_spread(n)
    plan = plan_weaver(scenario.band_plan)
    shared = count_components(n, Topology.SHARED_IF)
    per_element = count_components(n, Topology.PER_ELEMENT)
    bp = scenario.band_plan
    rf_bw = (bp.lower_band[1] - bp.lower_band[0]) + (bp.upper_band[1] - bp.upper_band[0])

    figures = {
        "eirp_dbm": eirp_dbm,
        "derived_eirp_dbm": derived,
        "eirp_spread_dbm": list(spread),
        "eirp_over_pdc_percent": eirp_over_pdc(eirp_dbm, budget),
        "pdc_tx_per_element_mw": budget.pdc_tx_per_element,
        "pdc_rx_per_element_mw": budget.pdc_rx_per_element,
        "pdc_tx_total_mw": budget.total_tx_mw,
        "pdc_rx_total_mw": budget.total_rx_mw,
        "n_elements": n,
        "dies": math.ceil(n / ELEMENTS_PER_DIE),
        "rf_bandwidth_hz": rf_bw,
        "lo_tuning_range_hz": plan.tuning_range,
        "lo_fbw": plan.fbw,
        "iq_mixers_shared": shared.iq_mixers,
        "iq_filters_shared": shared.iq_filters,
        "iq_mixers_per_element": per_element.iq_mixers,
        "iq_filters_per_element": per_element.iq_filters,
        "rx_conversion_gain_db": power.rx_conversion_gain_db,
        "noise_figure_db": power.noise_figure_db,
        "data_rates_bps": {
            f"{m.order}-QAM": data_rate(m.order, m.symbol_rate) for m in scenario.modulations
        },
    }
    logger.debug("table figures: %s", figures)
    return figures
