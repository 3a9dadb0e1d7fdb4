#!/usr/bin/env python3
"""
Scenario file loading, schema validation and Scenario construction.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence, Tuple, Union

import yaml

from script.core.array_model import ArrayGeometry
from script.core.budget import PowerBudget
from script.core.freq_plan import BandPlan, PlanConstraints
from script.core.link_sim import (
    ArraySettings,
    CalibrationSettings,
    ChannelSettings,
    LinkSettings,
    ModulationSpec,
    PowerSettings,
    Scenario,
    WeaverSettings,
)
from script.core.model import SimulationError
from script.core.weaver import IqImpairment

SCHEMA_VERSION = 1

KeyPath = Tuple[Union[str, int], ...]


class ConfigError(Exception):
    """Configuration error exception."""

    def __init__(self, message: str, location: str = "", key: str = ""):
        self.location = location
        self.key = key
        prefix = ": ".join(p for p in (location, key) if p)
        super().__init__(f"{prefix}: {message}" if prefix else message)

    def to_dict(self) -> dict:
        return {"type": "ConfigError", "stage": "config", "message": str(self)}


@dataclass(frozen=True)
class Field:
    """One schema entry.

    kind is one of: number, integer, bool, string, pair, number_list, integer_list.
    """

    kind: str
    minimum: Optional[float] = None
    exclusive: bool = False
    choices: Optional[Sequence[Any]] = None
    nullable: bool = False


_NUM = Field("number")
_POS = Field("number", minimum=0.0, exclusive=True)
_NONNEG = Field("number", minimum=0.0)
_COUNT = Field("integer", minimum=1)

SCHEMA: Dict[str, Any] = {
    "schema_version": Field("integer"),
    "seed": Field("integer", minimum=0),
    "band_plan": {
        "lower_band": Field("pair"),
        "upper_band": Field("pair"),
        "channel_width": _POS,
        "channel_raster": _POS,
    },
    "weaver": {
        "channel": _POS,
        "conversion_gain_db": _NUM,
        "gain_flatness_db": _NONNEG,
        "max_if1_bandwidth": _POS,
    },
    "impairments": [
        {
            "gain_imbalance_db": _NUM,
            "phase_imbalance_deg": _NUM,
            "applies_to": Field("string", choices=("RF", "IF")),
            "sideband": Field("string", choices=("LSB", "USB"), nullable=True),
        }
    ],
    "array": {
        "rows": _COUNT,
        "cols": _COUNT,
        "spacing": _POS,
        "n_states": Field("integer", minimum=2),
        "rms_phase_error_deg": _NONNEG,
        "feed_amp_db": _NONNEG,
        "feed_phase_deg": _NONNEG,
        "steer_angle": _NUM,
    },
    "power": {
        "pdc_tx_per_element_mw": _NONNEG,
        "pdc_rx_per_element_mw": _NONNEG,
        "shared_overhead_mw": _NONNEG,
        "pout_per_element_dbm": _NUM,
        "antenna_gain_dbi": _NUM,
        "antenna_gain_range_dbi": Field("pair"),
        "implementation_loss_db": _NUM,
        "eirp_dbm": Field("number", nullable=True),
        "rx_conversion_gain_db": _NUM,
        "noise_figure_db": _NONNEG,
    },
    "channel": {
        "snr_db": Field("number", nullable=True),
        "distance": _POS,
        "rx_antenna_gain_dbi": _NUM,
        "noise_bandwidth": _POS,
    },
    "modulation": [
        {
            "order": Field("integer", choices=(4, 16, 64)),
            "symbol_rate": _POS,
            "n_symbols": _COUNT,
        }
    ],
    "link": {
        "rolloff": _POS,
        "span_symbols": _COUNT,
        "samples_per_symbol": Field("integer", minimum=2),
        "preamble_symbols": _COUNT,
        "calibrated_band": Field("string", choices=("LB", "UB")),
        "image_interferer_db": Field("number", nullable=True),
        "constellation_points": _COUNT,
    },
    "constraints": {
        "if1_max_bw": _POS,
        "lo2_fixed": Field("bool"),
        "multiplier_set": Field("integer_list"),
        "base_osc": Field("number", minimum=0.0, exclusive=True, nullable=True),
        "base_tuning_range": Field("number", minimum=0.0, nullable=True),
        "grid_step": _POS,
    },
    "calibration": {
        "target_order": Field("integer", choices=(4, 16, 64)),
        "target_evm_db": _NUM,
        "knob_max_db": _POS,
        "xtol": _POS,
    },
    "irr": {
        "gain_grid_db": Field("number_list"),
        "phase_grid_deg": Field("number_list"),
        "fft_size": Field("integer", minimum=64),
    },
    "beam": {
        "angles": Field("string"),
    },
}


class ConfigLoader:
    """Scenario loader and validator."""

    def __init__(self, config_path: str):
        """
        Initialize config loader.

        Args:
            config_path: Path to the scenario file (YAML or JSON).
        """
        if not config_path:
            raise ConfigError("config_path is required and cannot be None or empty")
        self.config_path = config_path
        self.config: Dict[str, Any] = {}
        self.lines: Dict[KeyPath, str] = {}

    def _resolve_import_path(self, import_path: str, current_file: Path) -> Path:
        """
        Resolve import path relative to the importing file only.

        Raises:
            ConfigError: If the imported file does not exist.
        """
        if Path(import_path).is_absolute():
            resolved = Path(import_path)
            if not resolved.exists():
                raise ConfigError(f"Import file not found: {import_path}")
            return resolved.resolve()

        relative_to_file = current_file.parent / import_path
        if relative_to_file.exists():
            return relative_to_file.resolve()

        raise ConfigError(
            f"Import file not found: {import_path} "
            f"(searched relative to {current_file.parent})"
        )

    @staticmethod
    def _node_lines(node: yaml.Node, source: str, path: KeyPath = ()) -> Dict[KeyPath, str]:
        """Map every key path under ``node`` to ``file:line``."""
        lines: Dict[KeyPath, str] = {path: f"{source}:{node.start_mark.line + 1}"}
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                child = path + (key_node.value,)
                lines.update(ConfigLoader._node_lines(value_node, source, child))
                lines[child] = f"{source}:{key_node.start_mark.line + 1}"
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                lines.update(ConfigLoader._node_lines(item, source, path + (i,)))
        return lines

    def _load_yaml_with_imports(
        self, file_path: Path, loaded_files: Optional[set] = None
    ) -> Tuple[Dict[str, Any], Dict[KeyPath, str]]:
        """
        Load one file and everything it imports.

        Returns:
            (merged config, key path -> source line)
        """
        if loaded_files is None:
            loaded_files = set()

        file_path = file_path.resolve()
        if str(file_path) in loaded_files:
            raise ConfigError(f"Circular import detected: {file_path}")
        loaded_files.add(str(file_path))

        if not file_path.exists():
            raise ConfigError(f"Configuration file not found: {file_path}")

        try:
            text = file_path.read_text(encoding="utf-8")
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            config = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"{file_path}:{mark.line + 1}" if mark else str(file_path)
            raise ConfigError(f"Error parsing YAML: {e}", location=where)
        except OSError as e:
            raise ConfigError(f"Error reading configuration file {file_path}: {e}")

        if config is None:
            raise ConfigError(f"Configuration file is empty: {file_path}")
        if not isinstance(config, dict):
            raise ConfigError("Scenario must be a mapping", location=f"{file_path}:1")
        lines = self._node_lines(node, file_path.name)

        if "import" in config:
            import_paths = config["import"]
            if isinstance(import_paths, str):
                import_paths = [import_paths]

            imported_config: Dict[str, Any] = {}
            imported_lines: Dict[KeyPath, str] = {}
            for import_path in import_paths:
                resolved_path = self._resolve_import_path(import_path, file_path)
                imported, imported_at = self._load_yaml_with_imports(resolved_path, loaded_files)
                imported_config = self._deep_merge(imported_config, imported)
                imported_lines.update(imported_at)

            config_without_import = {k: v for k, v in config.items() if k != "import"}
            config = self._deep_merge(imported_config, config_without_import)
            imported_lines.update(lines)
            lines = imported_lines

        loaded_files.remove(str(file_path))
        return config, lines

    def _deep_merge(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """
        Deep merge two dictionaries, with override taking precedence.

        Lists (impairments, modulation) are replaced, never appended.
        """
        result = copy.deepcopy(base)
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._deep_merge(result[key], value)
            else:
                result[key] = copy.deepcopy(value)
        return result

    def load(self) -> Dict[str, Any]:
        """
        Load and validate the scenario file.

        Returns:
            Merged configuration dictionary.

        Raises:
            ConfigError: If the file cannot be loaded or violates the schema.
        """
        config_file = Path(self.config_path)
        if not config_file.exists():
            raise ConfigError(f"Configuration file not found: {config_file}")

        self.config, self.lines = self._load_yaml_with_imports(config_file)
        self._validate_config()
        return self.config

    # ---------------------------------------------------------------- schema

    def _where(self, path: KeyPath) -> str:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return self.lines.get((), str(self.config_path))

    def _fail(self, path: KeyPath, message: str) -> NoReturn:
        dotted = ".".join(str(p) for p in path)
        raise ConfigError(message, location=self._where(path), key=dotted)

    def _validate_config(self):
        """
        Validate the merged configuration against SCHEMA.

        Raises:
            ConfigError: On unknown keys, wrong types or out-of-range values.
        """
        version = self.config.get("schema_version")
        if version is None:
            self._fail(("schema_version",), "missing schema_version")
        self._check_mapping(self.config, SCHEMA, ())
        if version != SCHEMA_VERSION:
            self._fail(
                ("schema_version",),
                f"unsupported schema_version {version}, expected {SCHEMA_VERSION}",
            )

    def _check_mapping(self, value: Any, schema: Dict[str, Any], path: KeyPath) -> None:
        if not isinstance(value, dict):
            self._fail(path, "must be a mapping")
        for key, item in value.items():
            if key not in schema:
                known = ", ".join(sorted(schema))
                self._fail(path + (key,), f"unknown key (expected one of: {known})")
            self._check(item, schema[key], path + (key,))

    def _check(self, value: Any, rule: Any, path: KeyPath) -> None:
        if isinstance(rule, dict):
            self._check_mapping(value, rule, path)
        elif isinstance(rule, list):
            if not isinstance(value, list):
                self._fail(path, "must be a list")
            for i, item in enumerate(value):
                self._check_mapping(item, rule[0], path + (i,))
        else:
            self._check_field(value, rule, path)

    def _check_field(self, value: Any, f: Field, path: KeyPath) -> None:
        if value is None:
            if not f.nullable:
                self._fail(path, "must not be null")
            return
        if f.kind == "bool":
            if not isinstance(value, bool):
                self._fail(path, "must be true or false")
            return
        if f.kind == "string":
            if not isinstance(value, str):
                self._fail(path, "must be a string")
        elif f.kind in ("number", "integer"):
            self._check_number(value, f, path)
        elif f.kind == "pair":
            if not (isinstance(value, list) and len(value) == 2):
                self._fail(path, "must be a two-element list")
            for i, v in enumerate(value):
                self._check_number(v, _NUM, path + (i,))
        elif f.kind in ("number_list", "integer_list"):
            if not isinstance(value, list) or not value:
                self._fail(path, "must be a non-empty list")
            inner = Field("integer" if f.kind == "integer_list" else "number", minimum=f.minimum)
            for i, v in enumerate(value):
                self._check_number(v, inner, path + (i,))
        if f.choices is not None and value not in f.choices:
            self._fail(path, f"must be one of {list(f.choices)}, got {value!r}")

    def _check_number(self, value: Any, f: Field, path: KeyPath) -> None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self._fail(path, f"must be a {f.kind}, got {type(value).__name__}")
        if f.kind == "integer" and not isinstance(value, int):
            self._fail(path, f"must be an integer, got {value!r}")
        if isinstance(value, float) and math.isnan(value):
            self._fail(path, "must not be NaN")
        if f.minimum is not None:
            if value < f.minimum or (f.exclusive and value == f.minimum):
                op = ">" if f.exclusive else ">="
                self._fail(path, f"must be {op} {f.minimum}, got {value}")

    # -------------------------------------------------------------- scenario

    def build_scenario(self, seed: Optional[int] = None) -> Scenario:
        """
        Turn the validated configuration into a Scenario.

        Domain rejections (e.g. a band with low above high) become ConfigError
        pointing at the offending section.
        """
        if not self.config:
            self.load()
        c = self.config
        sections: Dict[str, Any] = {}
        for name, build in _BUILDERS.items():
            path: KeyPath = (name,)
            try:
                sections[name] = build(c.get(name))
            except SimulationError as e:
                self._fail(path, f"{type(e).__name__}: {e}")
            except (TypeError, ValueError) as e:
                self._fail(path, str(e))

        try:
            scenario = Scenario(
                band_plan=sections["band_plan"],
                weaver=sections["weaver"],
                impairments=sections["impairments"],
                array=sections["array"],
                power=sections["power"],
                channel=sections["channel"],
                modulations=sections["modulation"],
                link=sections["link"],
                constraints=sections["constraints"],
                calibration=sections["calibration"],
                seed=c.get("seed", 0),
            )
        except SimulationError as e:
            self._fail(("modulation",), f"{type(e).__name__}: {e}")
        if seed is not None:
            scenario = scenario.with_seed(seed)
        return scenario

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.config.get(name) or {})


def _band_plan(d: Optional[dict]) -> BandPlan:
    d = d or {}
    kwargs: Dict[str, Any] = {}
    for key in ("lower_band", "upper_band"):
        if key in d:
            kwargs[key] = tuple(d[key])
    for key in ("channel_width", "channel_raster"):
        if key in d:
            kwargs[key] = float(d[key])
    return BandPlan(**kwargs)


def _weaver(d: Optional[dict]) -> WeaverSettings:
    return WeaverSettings(**(d or {}))


def _impairments(items: Optional[List[dict]]) -> Tuple[IqImpairment, ...]:
    return tuple(IqImpairment(**item) for item in (items or []))


def _array(d: Optional[dict]) -> ArraySettings:
    d = dict(d or {})
    geometry = ArrayGeometry(
        rows=d.pop("rows", 4), cols=d.pop("cols", 4), spacing=d.pop("spacing", 0.5)
    )
    return ArraySettings(geometry=geometry, **d)


def _power(d: Optional[dict]) -> PowerSettings:
    d = dict(d or {})
    budget = PowerBudget(
        pdc_tx_per_element=d.pop("pdc_tx_per_element_mw", 250.0),
        pdc_rx_per_element=d.pop("pdc_rx_per_element_mw", 160.0),
        shared_overhead=d.pop("shared_overhead_mw", 0.0),
    )
    if "antenna_gain_range_dbi" in d:
        d["antenna_gain_range_dbi"] = tuple(d["antenna_gain_range_dbi"])
    return PowerSettings(budget=budget, **d)


def _channel(d: Optional[dict]) -> ChannelSettings:
    return ChannelSettings(**(d or {}))


def _modulation(items: Optional[List[dict]]) -> Tuple[ModulationSpec, ...]:
    if items is None:
        return (ModulationSpec(16, 2e9), ModulationSpec(64, 1.5e9))
    return tuple(ModulationSpec(**item) for item in items)


def _link(d: Optional[dict]) -> LinkSettings:
    return LinkSettings(**(d or {}))


def _constraints(d: Optional[dict]) -> PlanConstraints:
    d = dict(d or {})
    if "multiplier_set" in d:
        d["multiplier_set"] = tuple(d["multiplier_set"])
    return PlanConstraints(**d)


def _calibration(d: Optional[dict]) -> CalibrationSettings:
    return CalibrationSettings(**(d or {}))


_BUILDERS = {
    "band_plan": _band_plan,
    "weaver": _weaver,
    "impairments": _impairments,
    "array": _array,
    "power": _power,
    "channel": _channel,
    "modulation": _modulation,
    "link": _link,
    "constraints": _constraints,
    "calibration": _calibration,
}
