"""
双曲性度量模块

Lyapunov 指数、截面面积增长与支配间隙的有限时间估计。
"""

from .metrics import (
    DEFAULT_RENORM,
    GrowthReport,
    central_plane,
    domination_profile,
    frame_growth,
    growth_survey,
    orbit_hyperbolicity,
    lyapunov_spectrum,
    qr_growth,
    sectional_growth,
    two_norm,
)

__all__ = [
    "GrowthReport",
    "DEFAULT_RENORM",

    # 基本量
    "two_norm",
    "qr_growth",
    "frame_growth",
    "central_plane",

    # 测量
    "lyapunov_spectrum",
    "sectional_growth",
    "domination_profile",
    "orbit_hyperbolicity",
    "growth_survey",
]
