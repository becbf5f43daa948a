"""
默认配置与实验配方

定义 ShadowLab 的默认配置以及按实验命名的配置模板。
"""

import copy

from ..errors import ConfigurationError
from .config_manager import (
    AttractorConfig,
    ChainConfig,
    GeometryConfig,
    GrowthConfig,
    ModelConfig,
    ShadowLabConfig,
    TracingConfig,
)


# 默认项目配置
DEFAULT_CONFIG = ShadowLabConfig()


# 实验配方
RECIPES = {
    # Lorenz 两段对抗链，ε 取 β_σ/4；候选只取吸引子样本点
    "fpotp-failure": ShadowLabConfig(
        experiment="fpotp-failure",
        recipe="fpotp-failure",
        model=ModelConfig(name="lorenz"),
        chain=ChainConfig(builder="adversarial", T=1.0, branch="auto"),
        tracing=TracingConfig(
            epsilon=None, deltas=[1e-1, 1e-2, 1e-3], subsample=10_000, restrict_to_attractor=True
        ),
        growth=GrowthConfig(points=0),
        plot_kinds=["trace-distance", "error-vs-delta", "branches"],
    ),
    # Lorenz 三段链，经过双侧点附近
    "side-point-failure": ShadowLabConfig(
        experiment="side-point-failure",
        recipe="side-point-failure",
        model=ModelConfig(name="lorenz"),
        chain=ChainConfig(builder="three-leg", T=1.0),
        tracing=TracingConfig(epsilon=None, deltas=[5e-1, 2e-1, 1e-1]),
        geometry=GeometryConfig(side_points=20),
        growth=GrowthConfig(points=10),
        plot_kinds=["trace-distance", "side-map", "growth", "branches"],
    ),
    # 线性鞍点上的扰动链，应当可追踪
    "hyperbolic-control": ShadowLabConfig(
        experiment="hyperbolic-control",
        recipe="hyperbolic-control",
        model=ModelConfig(name="saddle"),
        chain=ChainConfig(builder="perturbed", T=0.5, x0=[0.5, 0.5, 0.1], segments=3, segment_time=0.5),
        tracing=TracingConfig(epsilon=0.05, deltas=[1e-2, 1e-3, 1e-4], refine_depth=12, refine_points=32),
        growth=GrowthConfig(points=0),
        plot_kinds=["trace-distance", "error-vs-delta"],
    ),
    # 极限环上的扰动链
    "limit-cycle-control": ShadowLabConfig(
        experiment="limit-cycle-control",
        recipe="limit-cycle-control",
        model=ModelConfig(name="limit_cycle", params={"a": 1.0}),
        chain=ChainConfig(builder="perturbed", T=1.0, x0=[1.0, 0.0, 0.0], segments=4, segment_time=1.5),
        tracing=TracingConfig(epsilon=0.05, deltas=[1e-2, 1e-3, 1e-4], refine_depth=12, refine_points=32),
        growth=GrowthConfig(points=0),
        plot_kinds=["trace-distance", "error-vs-delta"],
    ),
    # 测试用的极小规模
    "smoke": ShadowLabConfig(
        experiment="hyperbolic-control",
        recipe="smoke",
        model=ModelConfig(name="saddle"),
        attractor=AttractorConfig(transient=0.0, duration=1.0, count=10),
        chain=ChainConfig(builder="perturbed", T=0.5, x0=[0.5, 0.5, 0.1], segments=2, segment_time=0.5),
        tracing=TracingConfig(epsilon=0.05, deltas=[1e-2, 1e-3], refine_depth=3, refine_points=8, batch_size=8),
        growth=GrowthConfig(points=0),
        plot_kinds=["trace-distance", "error-vs-delta"],
    ),
}


def get_recipe(name: str = "fpotp-failure") -> ShadowLabConfig:
    """
    获取实验配方

    Args:
        name: 配方名称

    Returns:
        配置对象（副本）

    Raises:
        ConfigurationError: 未知的配方名称
    """
    if name not in RECIPES:
        raise ConfigurationError(f"未知的配方: {name}，可选: {list(RECIPES.keys())}")
    return copy.deepcopy(RECIPES[name])
