from __future__ import annotations

import logging
from typing import Any, Dict, Optional

from script.core.budget import LinkBudgetInput, rx_snr, table1_figures
from script.core.freq_plan import lo_tuning_range, optimize_plan, plan_weaver
from script.core.link_sim import (
    Scenario,
    band_switch_experiment,
    beam_sweep_experiment,
    calibrate_residual,
    run_link,
)
from script.core.model import Architecture, Direction, SimulationError
from script.core.walker import DEFAULT_GAIN_GRID_DB, DEFAULT_PHASE_GRID_DEG, Walker
from script.core.weaver import chain_irr, simulate_irr, weaver_config_for

logger = logging.getLogger(__name__)

COMMANDS = ("plan", "irr", "beam", "link", "budget")
DEFAULT_ANGLES = "-30:5:30"


class ScenarioRunner:
    def __init__(self, scenario: Scenario, settings: Optional[Dict[str, Any]] = None):
        """
        Args:
            scenario: validated scenario
            settings: raw scenario sections, for the irr/beam defaults
        """
        self.scenario = scenario
        self.settings = settings or {}

    def run(self, command: str, **options) -> Dict[str, Any]:
        """运行一个子命令，返回可直接写入 report.json 的结果字典"""
        if command not in COMMANDS:
            raise SimulationError(f"unknown command '{command}'", stage="cli")
        logger.info("running %s with seed %d", command, self.scenario.seed)
        return getattr(self, command)(**options)

    def plan(self, arch: Optional[str] = None) -> Dict[str, Any]:
        s = self.scenario
        archs = [Architecture(arch)] if arch else list(Architecture)
        rows = [lo_tuning_range(a, s.band_plan).to_dict() for a in archs]
        results: Dict[str, Any] = {"architectures": rows}
        if Architecture.WEAVER in archs:
            results["weaver_plan"] = plan_weaver(s.band_plan).to_dict()
            results["optimized_plan"] = optimize_plan(s.band_plan, s.constraints).to_dict()
        return results

    def _chain_config(self):
        s = self.scenario
        return weaver_config_for(
            plan_weaver(s.band_plan),
            s.weaver.channel,
            Direction.RX,
            max_if1_bandwidth=s.weaver.max_if1_bandwidth,
        )

    def irr(self, grid: bool = False) -> Dict[str, Any]:
        s = self.scenario
        cfg = self._chain_config()
        irr_settings = self.settings.get("irr") or {}
        fft_size = irr_settings.get("fft_size", 1024)
        results: Dict[str, Any] = {
            "scenario_irr": {
                "analytic": chain_irr(s.impairments, cfg.sideband_bit),
                "simulated": simulate_irr(cfg, s.impairments, fft_size=fft_size),
            }
        }
        if grid:
            rows = []
            for g, p, imp in Walker().iter_impairment_grid(
                irr_settings.get("gain_grid_db", DEFAULT_GAIN_GRID_DB),
                irr_settings.get("phase_grid_deg", DEFAULT_PHASE_GRID_DEG),
            ):
                analytic = chain_irr([imp], cfg.sideband_bit)
                simulated = simulate_irr(cfg, [imp], fft_size=fft_size)
                rows.append(
                    {
                        "gain_imbalance_db": g,
                        "phase_imbalance_deg": p,
                        "analytic_db": analytic,
                        "simulated_db": simulated,
                        "delta_db": simulated - analytic,
                    }
                )
            results["grid"] = rows
            results["max_abs_delta_db"] = max(abs(r["delta_db"]) for r in rows)
        return results

    def beam(self, angles: Optional[str] = None) -> Dict[str, Any]:
        spec = angles or (self.settings.get("beam") or {}).get("angles", DEFAULT_ANGLES)
        sweep = beam_sweep_experiment(self.scenario, list(Walker().iter_angles(spec)))
        return {"angles": spec, **sweep.to_dict()}

    def link(self, calibrate: bool = False) -> Dict[str, Any]:
        s = self.scenario
        results: Dict[str, Any] = {}
        if calibrate:
            fit = calibrate_residual(s)
            results["calibration"] = fit.to_dict()
            s = fit.scenario
        results["link"] = run_link(s).to_dict()
        results["band_switch"] = [
            band_switch_experiment(s, m.order).to_dict() for m in s.modulations
        ]
        return results

    def budget(self) -> Dict[str, Any]:
        s = self.scenario
        figures = table1_figures(s)
        n = s.array.geometry.n_elements
        cfg = self._chain_config()
        link = LinkBudgetInput(
            eirp=s.power.effective_eirp(n),
            carrier=cfg.rf_center,
            distance=s.channel.distance,
            rx_antenna_gain=s.channel.rx_antenna_gain_dbi,
            rx_conversion_gain=s.power.rx_conversion_gain_db,
            noise_figure=s.power.noise_figure_db,
            bandwidth=s.channel.noise_bandwidth,
        )
        return {**figures, "rx_snr_db": rx_snr(link)}
