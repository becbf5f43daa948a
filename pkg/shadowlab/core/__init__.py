"""
核心运行时模块

随机数流与有序进程池。实验编排、报告与绘图数据位于各自子模块中
（shadowlab.core.experiment / reports / plotting），按需导入。
"""

from .pool import WorkerPool
from .rng import GENERATOR_NAME, SeedStream

__all__ = [
    # 随机数
    "SeedStream",
    "GENERATOR_NAME",

    # 并行
    "WorkerPool",
]
