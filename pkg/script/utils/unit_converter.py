"""单位转换工具

RF 预算与信号链中反复出现的 dB / 线性量 / 功率单位换算。

约定：
- 场景文件中的数值一律为基本单位（Hz、dBm、mW、度），不带单位字符串
- 功率比用 dB，幅度比用 20·log10，功率用 10·log10
- 对数运算的零输入返回 -inf，由调用方决定是否截断到报告下限
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class UnitConverter:
    """单位转换器

    所有换算均为类方法，常量集中定义在类上，便于测试替换。
    """

    # ========== 物理常量 ==========
    SPEED_OF_LIGHT = 299_792_458.0  # m/s
    THERMAL_NOISE_DBM_HZ = -174.0  # 290 K 下的 kTB 噪声密度
    MW_PER_W = 1000.0

    # ========== 报告下限 ==========
    # EVM / IRR 等"理想为零"的量在报告中截断到这个值
    DB_FLOOR = -120.0
    DB_CAP = 120.0

    _FREQ_PREFIXES = ((1e12, "THz"), (1e9, "GHz"), (1e6, "MHz"), (1e3, "kHz"))

    @classmethod
    def db_to_power_ratio(cls, db: ArrayLike) -> ArrayLike:
        return np.power(10.0, np.asarray(db, dtype=float) / 10.0)

    @classmethod
    def power_ratio_to_db(cls, ratio: ArrayLike) -> ArrayLike:
        """功率比 -> dB，零输入得到 -inf"""
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(np.asarray(ratio, dtype=float))

    @classmethod
    def amplitude_ratio_to_db(cls, ratio: ArrayLike) -> ArrayLike:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.asarray(ratio, dtype=float))

    @classmethod
    def dbm_to_watt(cls, dbm: float) -> float:
        if dbm == -math.inf:
            return 0.0
        return 10.0 ** ((dbm - 30.0) / 10.0)

    @classmethod
    def mw_to_watt(cls, mw: float) -> float:
        return mw / cls.MW_PER_W

    @classmethod
    def format_hz_to_human(cls, hz: float) -> str:
        """把频率格式化成人类可读的字符串（用于报告）

        Examples:
            >>> UnitConverter.format_hz_to_human(78.5e9)
            '78.500 GHz'
        """
        for scale, unit in cls._FREQ_PREFIXES:
            if abs(hz) >= scale:
                return f"{hz / scale:.3f} {unit}"
        return f"{hz:.3f} Hz"

