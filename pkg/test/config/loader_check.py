#!/usr/bin/env python3
"""
场景配置加载测试：导入合并、schema 校验、错误定位
"""

import copy
import math
from pathlib import Path

import pytest
import yaml

from script.config_loader import SCHEMA_VERSION, ConfigError, ConfigLoader
from script.core.model import Sideband

HERE = Path(__file__).parent
CONFIG_DIR = HERE.parent.parent / "config"


def _write(tmp_path, text, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_basic_defaults():
    loader = ConfigLoader(str(HERE / "basic.yaml"))
    config = loader.load()
    assert config["schema_version"] == SCHEMA_VERSION
    scenario = loader.build_scenario()
    assert scenario.seed == 7
    assert scenario.array.geometry.n_elements == 16
    assert scenario.modulations[0].n_symbols == 500
    assert scenario.impairments == ()


def test_import_merges_and_overrides():
    loader = ConfigLoader(str(HERE / "import.yaml"))
    config = loader.load()
    assert "import" not in config
    assert config["seed"] == 7
    scenario = loader.build_scenario(seed=11)
    assert scenario.seed == 11
    assert scenario.weaver.gain_flatness_db == 1.5
    assert scenario.array.geometry.cols == 8
    assert scenario.impairments[0].sideband is Sideband.USB


def test_unknown_key_is_located():
    with pytest.raises(ConfigError) as err:
        ConfigLoader(str(HERE / "invalid.yaml")).load()
    assert err.value.key == "array.colums"
    assert err.value.location == "invalid.yaml:5"


def test_circular_import():
    with pytest.raises(ConfigError, match="Circular import"):
        ConfigLoader(str(HERE / "circular_a.yaml")).load()


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        ConfigLoader(str(HERE / "nope.yaml")).load()


@pytest.mark.parametrize(
    "text,key",
    [
        ("seed: 1\n", "schema_version"),
        ("schema_version: 2\n", "schema_version"),
        ("schema_version: 1\narray:\n  rows: 0\n", "array.rows"),
        ("schema_version: 1\narray:\n  spacing: -0.5\n", "array.spacing"),
        ("schema_version: 1\nweaver:\n  channel: 73e9\n", "weaver.channel"),
        ("schema_version: 1\nmodulation:\n  - order: 32\n", "modulation.0.order"),
        ("schema_version: 1\nimpairments:\n  - applies_to: LO\n", "impairments.0.applies_to"),
        ("schema_version: 1\nband_plan:\n  lower_band: [71.0e+9]\n", "band_plan.lower_band"),
        ("schema_version: 1\nconstraints:\n  lo2_fixed: 1\n", "constraints.lo2_fixed"),
    ],
)
def test_schema_rejections(tmp_path, text, key):
    with pytest.raises(ConfigError) as err:
        ConfigLoader(_write(tmp_path, text)).load()
    assert err.value.key == key
    assert err.value.location.startswith("scenario.yaml:")


def test_domain_error_becomes_config_error(tmp_path):
    text = "schema_version: 1\nband_plan:\n  lower_band: [76.0e+9, 71.0e+9]\n"
    loader = ConfigLoader(_write(tmp_path, text))
    loader.load()
    with pytest.raises(ConfigError) as err:
        loader.build_scenario()
    assert err.value.key == "band_plan"
    assert "PlanError" in str(err.value)


def test_yaml_syntax_error(tmp_path):
    with pytest.raises(ConfigError, match="Error parsing YAML"):
        ConfigLoader(_write(tmp_path, "schema_version: [1\n")).load()


def test_json_scenario(tmp_path):
    path = _write(tmp_path, '{"schema_version": 1, "seed": 3}', name="scenario.json")
    assert ConfigLoader(path).build_scenario().seed == 3


def test_shipped_scenarios():
    """仓库自带的场景文件都能通过校验"""
    paper = ConfigLoader(str(CONFIG_DIR / "scenarios" / "paper.yaml"))
    scenario = paper.build_scenario()
    assert scenario.seed == 2024
    assert scenario.power.eirp_dbm == 30.0
    assert scenario.impairments[0].gain_imbalance_db == 1.0
    assert paper.section("irr")["fft_size"] == 1024

    ideal = ConfigLoader(str(CONFIG_DIR / "scenarios" / "ideal.yaml")).build_scenario()
    assert math.isinf(ideal.channel.snr_db)


def _mapping_paths(node, path=()):
    if isinstance(node, dict):
        yield path
        for key, value in node.items():
            yield from _mapping_paths(value, path + (key,))
    elif isinstance(node, list):
        for i, value in enumerate(node):
            yield from _mapping_paths(value, path + (i,))


def _number_paths(node, path=()):
    if isinstance(node, dict):
        items = node.items()
    elif isinstance(node, list):
        items = enumerate(node)
    else:
        if isinstance(node, (int, float)) and not isinstance(node, bool):
            yield path
        return
    for key, value in items:
        yield from _number_paths(value, path + (key,))


def _at(config, path):
    for key in path:
        config = config[key]
    return config


def _paper_config():
    return ConfigLoader(str(CONFIG_DIR / "scenarios" / "paper.yaml")).load()


def test_mutated_scenarios_unknown_keys(tmp_path):
    """在样机场景的每个映射里塞一个未知键，全部被拒绝"""
    base = _paper_config()
    paths = list(_mapping_paths(base))
    assert len(paths) >= 14
    for path in paths:
        mutated = copy.deepcopy(base)
        _at(mutated, path)["bogus_key"] = 1
        scenario = _write(tmp_path, yaml.safe_dump(mutated))
        with pytest.raises(ConfigError) as err:
            ConfigLoader(scenario).load()
        assert err.value.key.endswith("bogus_key"), path


def test_mutated_scenarios_wrong_types(tmp_path):
    """把任一数值字段换成字符串，全部被拒绝并指出该字段"""
    base = _paper_config()
    for path in _number_paths(base):
        mutated = copy.deepcopy(base)
        _at(mutated, path[:-1])[path[-1]] = "oops"
        scenario = _write(tmp_path, yaml.safe_dump(mutated))
        with pytest.raises(ConfigError) as err:
            ConfigLoader(scenario).load()
        assert err.value.key.startswith(str(path[0])), path
