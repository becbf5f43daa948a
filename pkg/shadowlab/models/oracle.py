"""
一维 Lorenz 映射预言机

f(x) = −sign(x)·(1 − c·|x|^α)，x ∈ [−1, 1]，0 处单一间断，
f(0⁻) = +1，f(0⁺) = −1。c·α ≥ √2 时 |f′| ≥ √2。
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..errors import ConfigurationError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LorenzMapOracle:
    """商动力学的精确一维预言机"""

    c: float = 1.8
    alpha: float = 0.8
    boundary_eps: float = 1e-15

    def __post_init__(self) -> None:
        if not (0.0 < self.c <= 2.0 and 0.0 < self.alpha <= 1.0):
            raise ConfigurationError(f"预言机参数超出范围: c={self.c}, alpha={self.alpha}")
        if self.c * self.alpha < SQRT2 - 1e-12:
            raise ConfigurationError(
                f"c·alpha = {self.c * self.alpha:.6g} < √2，映射不满足扩张条件"
            )

    def f(self, x: float, side: Optional[int] = None) -> float:
        """
        求 f(x)

        Args:
            x: [−1, 1] 中的点
            side: x = 0 时的单侧极限，−1 表示 0⁻，+1 表示 0⁺
        """
        s = side if x == 0.0 else (1 if x > 0 else -1)
        if s is None:
            raise ValueError("x=0 处需要指定单侧极限")
        return float(-s * (1.0 - self.c * abs(x) ** self.alpha))

    def derivative(self, x: float) -> float:
        if x == 0.0:
            return math.inf
        return float(self.c * self.alpha * abs(x) ** (self.alpha - 1.0))

    def __call__(self, x: float) -> float:
        return self.f(x)


@dataclass
class Itinerary:
    """
    迭代轨迹与符号序列

    Attributes:
        values: x, f(x), …, fⁿ(x)（遇到边界时截断）
        symbols: 第 k 个点的符号 s_k = sign(fᵏ(x))
        boundary: 是否在 n 步内击中间断点
        boundary_step: 击中间断点的步数
    """

    values: List[float] = field(default_factory=list)
    symbols: List[int] = field(default_factory=list)
    boundary: bool = False
    boundary_step: Optional[int] = None

    def word(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.symbols)


def oracle_iterate(oracle: LorenzMapOracle, x: float, n: int) -> Itinerary:
    """
    迭代预言机 n 次

    Args:
        oracle: 一维映射
        x: 初值，x ∈ [−1, 1]
        n: 迭代次数

    Returns:
        Itinerary；某次迭代在机器精度内落到 0 时置 boundary 标记并截断
    """
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"初值必须在 [−1, 1] 内: {x}")
    result = Itinerary()
    current = float(x)
    for k in range(n + 1):
        if abs(current) <= oracle.boundary_eps:
            result.boundary = True
            result.boundary_step = k
            break
        result.values.append(current)
        if k < n:
            result.symbols.append(1 if current > 0 else -1)
            current = oracle.f(current)
    return result


def oracle_fixed_point(oracle: LorenzMapOracle, branch: int) -> Optional[float]:
    """
    单支上的不动点

    Args:
        branch: +1 表示 (0, 1]，−1 表示 [−1, 0)

    Returns:
        不动点；该支上不存在时返回 None
    """
    sign = 1 if branch > 0 else -1

    def g(u: float) -> float:
        return oracle.f(sign * u) - sign * u

    lo, hi = 1e-12, 1.0
    g_lo, g_hi = g(lo), g(hi)
    if g_hi == 0.0:
        return float(sign * hi)
    if g_lo * g_hi > 0:
        return None
    return float(sign * brentq(g, lo, hi, xtol=1e-15))


def itinerary_cylinder(
    oracle: LorenzMapOracle,
    word: Sequence[int],
    subdivisions: int = 2 ** 12,
) -> Tuple[float, float]:
    """
    共享符号字的点集（区间细分的外包络）

    Args:
        word: 符号序列，元素为 ±1
        subdivisions: 初始细分数

    Returns:
        (lo, hi)；无点时返回 (nan, nan)
    """
    grid = np.linspace(-1.0, 1.0, subdivisions + 1)
    grid = grid[grid != 0.0]
    hits = []
    for x in grid:
        it = oracle_iterate(oracle, float(x), len(word))
        if not it.boundary and it.symbols == list(word):
            hits.append(x)
    if not hits:
        return (math.nan, math.nan)
    return (float(min(hits)), float(max(hits)))
