"""
模型模块

具体向量场目录以及一维 Lorenz 映射预言机。
"""

from .catalog import (
    LORENZ_DEFAULTS,
    MODEL_FACTORIES,
    is_lorenz_like,
    limit_cycle,
    linear,
    lorenz,
    lorenz_like_frame,
    make_model,
    saddle,
    singularity_spectrum,
)
from .oracle import (
    Itinerary,
    LorenzMapOracle,
    itinerary_cylinder,
    oracle_fixed_point,
    oracle_iterate,
)

__all__ = [
    # 向量场
    "make_model",
    "lorenz",
    "saddle",
    "limit_cycle",
    "linear",
    "MODEL_FACTORIES",
    "LORENZ_DEFAULTS",

    # 奇点分析
    "singularity_spectrum",
    "is_lorenz_like",
    "lorenz_like_frame",

    # 一维预言机
    "LorenzMapOracle",
    "Itinerary",
    "oracle_iterate",
    "oracle_fixed_point",
    "itinerary_cylinder",
]
